#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "subsel/covariance.hpp"

namespace subsel {

Matrix<double> read_matrix(std::istream& in) {
  long K = 0;
  if (!(in >> K) || K <= 0) throw ConfigError("matrix file must start with a positive dimension");
  Matrix<double> m(K, K);
  for (long i = 0; i < K; ++i)
    for (long j = 0; j < K; ++j)
      if (!(in >> m(i, j)))
        throw ConfigError("matrix file ended early at entry (" + std::to_string(i) + ", " +
                          std::to_string(j) + ")");
  std::string rest;
  if (in >> rest) throw ConfigError("unexpected trailing token '" + rest + "' in matrix file");
  return m;
}

void write_matrix(std::ostream& out, const Matrix<double>& m) {
  const auto old = out.precision(std::numeric_limits<double>::max_digits10);
  out << m.rows() << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j ? " " : "") << m(i, j);
    out << '\n';
  }
  out.precision(old);
}

Benchmark parse_benchmark(const std::string& name) {
  if (name == "sigma1") return Benchmark::Sigma1;
  if (name == "sigma2") return Benchmark::Sigma2;
  if (name == "sigma3") return Benchmark::Sigma3;
  throw ConfigError("unknown benchmark matrix '" + name + "'");
}

std::string benchmark_name(Benchmark which) {
  switch (which) {
    case Benchmark::Sigma1: return "sigma1";
    case Benchmark::Sigma2: return "sigma2";
    case Benchmark::Sigma3: return "sigma3";
  }
  return "?";
}

CovarianceMatrix<double> load_covariance(const std::string& name_or_path) {
  if (name_or_path == "sigma1" || name_or_path == "sigma2" || name_or_path == "sigma3")
    return benchmark_sigma<double>(parse_benchmark(name_or_path));
  std::ifstream in(name_or_path);
  if (!in) throw ConfigError("cannot open matrix file '" + name_or_path + "'");
  return validate<double>(read_matrix(in));
}

}  // namespace subsel
