#include "panelode/data.hpp"

namespace panelode::data {
namespace {

// Row order matches the published 2026/2030 forecast tables; columns follow
// kIndicatorColumns.
const scalar_t kForecast2026[30][6] = {
    {0.865, 0.382, 0.556, 0.846, 0.994, 0.297},  // Angul
    {0.858, 0.470, 0.617, 0.805, 0.997, 0.231},  // Balangir
    {0.851, 0.401, 0.500, 0.652, 0.993, 0.293},  // Baleshwar
    {0.813, 0.467, 0.579, 0.799, 0.995, 0.251},  // Bargarh
    {0.891, 0.329, 0.606, 0.755, 0.997, 0.226},  // Baudh
    {0.852, 0.248, 0.475, 0.640, 0.995, 0.306},  // Bhadrak
    {0.853, 0.608, 0.727, 0.911, 0.995, 0.340},  // Cuttack
    {0.844, 0.329, 0.460, 0.661, 0.992, 0.259},  // Debagarh
    {0.786, 0.346, 0.571, 0.798, 0.993, 0.283},  // Dhenkanal
    {0.810, 0.567, 0.601, 0.851, 0.994, 0.198},  // Gajapati
    {0.890, 0.771, 0.844, 0.956, 0.998, 0.293},  // Ganjam
    {0.863, 0.434, 0.597, 0.891, 0.997, 0.335},  // Jagatsinghpur
    {0.807, 0.276, 0.525, 0.821, 0.994, 0.330},  // Jajapur
    {0.845, 0.475, 0.672, 0.830, 0.992, 0.343},  // Jharsuguda
    {0.910, 0.358, 0.604, 0.728, 0.994, 0.258},  // Kalahandi
    {0.844, 0.357, 0.547, 0.787, 0.996, 0.318},  // Kendrapara
    {0.737, 0.391, 0.504, 0.652, 0.982, 0.264},  // Kendujhar
    {0.901, 0.304, 0.556, 0.788, 0.996, 0.247},  // Khandamal
    {0.909, 0.702, 0.850, 0.940, 0.997, 0.414},  // Khordha
    {0.717, 0.438, 0.551, 0.744, 0.988, 0.198},  // Koraput
    {0.860, 0.347, 0.490, 0.684, 0.997, 0.172},  // Malkangiri
    {0.771, 0.335, 0.384, 0.484, 0.982, 0.245},  // Mayurbhanj
    {0.827, 0.365, 0.460, 0.644, 0.992, 0.186},  // Nabarangapur
    {0.908, 0.536, 0.749, 0.911, 0.999, 0.270},  // Nayagarh
    {0.830, 0.310, 0.505, 0.741, 0.995, 0.211},  // Nuapada
    {0.916, 0.506, 0.696, 0.922, 0.998, 0.348},  // Puri
    {0.856, 0.610, 0.626, 0.813, 0.995, 0.192},  // Rayagada
    {0.836, 0.573, 0.660, 0.778, 0.991, 0.297},  // Sambalpur
    {0.885, 0.373, 0.682, 0.829, 0.998, 0.277},  // Sonapur
    {0.856, 0.529, 0.661, 0.790, 0.991, 0.329},  // Sundargarh
};

const scalar_t kForecast2030[30][6] = {
    {0.945, 0.524, 0.748, 0.923, 0.998, 0.362},  // Angul
    {0.949, 0.615, 0.798, 0.909, 0.999, 0.288},  // Balangir
    {0.931, 0.521, 0.680, 0.792, 0.998, 0.346},  // Baleshwar
    {0.925, 0.603, 0.762, 0.901, 0.999, 0.306},  // Bargarh
    {0.962, 0.483, 0.800, 0.884, 0.999, 0.289},  // Baudh
    {0.938, 0.360, 0.671, 0.792, 0.999, 0.365},  // Bhadrak
    {0.936, 0.718, 0.853, 0.954, 0.999, 0.398},  // Cuttack
    {0.938, 0.464, 0.670, 0.811, 0.998, 0.317},  // Debagarh
    {0.905, 0.479, 0.751, 0.892, 0.998, 0.343},  // Dhenkanal
    {0.924, 0.702, 0.785, 0.929, 0.999, 0.248},  // Gajapati
    {0.958, 0.848, 0.925, 0.980, 1.000, 0.348},  // Ganjam
    {0.944, 0.577, 0.780, 0.946, 0.999, 0.405},  // Jagatsinghpur
    {0.914, 0.398, 0.713, 0.906, 0.998, 0.395},  // Jajapur
    {0.931, 0.602, 0.814, 0.910, 0.998, 0.405},  // Jharsuguda
    {0.969, 0.515, 0.801, 0.864, 0.999, 0.323},  // Kalahandi
    {0.935, 0.493, 0.736, 0.889, 0.999, 0.381},  // Kendrapara
    {0.874, 0.512, 0.681, 0.794, 0.995, 0.315},  // Kendujhar
    {0.967, 0.460, 0.776, 0.900, 0.999, 0.310},  // Khandamal
    {0.962, 0.787, 0.922, 0.970, 0.999, 0.469},  // Khordha
    {0.875, 0.573, 0.736, 0.866, 0.997, 0.245},  // Koraput
    {0.953, 0.488, 0.717, 0.834, 0.999, 0.222},  // Malkangiri
    {0.903, 0.413, 0.557, 0.621, 0.994, 0.296},  // Mayurbhanj
    {0.939, 0.477, 0.670, 0.787, 0.998, 0.237},  // Nabarangapur
    {0.968, 0.684, 0.884, 0.961, 1.000, 0.337},  // Nayagarh
    {0.935, 0.450, 0.719, 0.870, 0.999, 0.265},  // Nuapada
    {0.970, 0.655, 0.851, 0.965, 1.000, 0.422},  // Puri
    {0.947, 0.735, 0.804, 0.911, 0.999, 0.239},  // Rayagada
    {0.927, 0.684, 0.805, 0.882, 0.998, 0.350},  // Sambalpur
    {0.959, 0.525, 0.842, 0.921, 1.000, 0.345},  // Sonapur
    {0.936, 0.649, 0.807, 0.889, 0.997, 0.387},  // Sundargarh
};

ReferenceTables build_tables() {
  ReferenceTables t;
  t.districts = odisha_district_names();
  t.y2026.resize(30, 6);
  t.y2030.resize(30, 6);
  for (index_t d = 0; d < 30; ++d) {
    for (index_t k = 0; k < 6; ++k) {
      t.y2026(d, k) = kForecast2026[d][k];
      t.y2030(d, k) = kForecast2030[d][k];
    }
  }
  return t;
}

}  // namespace

const std::vector<std::string>& odisha_district_names() {
  static const std::vector<std::string> names = {
      "Angul", "Balangir", "Baleshwar", "Bargarh",
      "Baudh", "Bhadrak", "Cuttack", "Debagarh",
      "Dhenkanal", "Gajapati", "Ganjam", "Jagatsinghpur",
      "Jajapur", "Jharsuguda", "Kalahandi", "Kendrapara",
      "Kendujhar", "Khandamal", "Khordha", "Koraput",
      "Malkangiri", "Mayurbhanj", "Nabarangapur", "Nayagarh",
      "Nuapada", "Puri", "Rayagada", "Sambalpur",
      "Sonapur", "Sundargarh",
  };
  return names;
}

const ReferenceTables& reference_tables() {
  static const ReferenceTables tables = build_tables();
  return tables;
}

}  // namespace panelode::data
