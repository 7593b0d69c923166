#include "geoldp/model.hpp"

#include <cctype>
#include <cmath>
#include <sstream>
#include <vector>

#include "geoldp/detail/family.hpp"

namespace geoldp {

void validate_generator(const Eigen::MatrixXd& Q) {
  const int n = static_cast<int>(Q.rows());
  if (Q.cols() != n || n < 1) throw InvalidGeneratorError("rate matrix must be square");
  double scale = std::max(1.0, Q.cwiseAbs().maxCoeff());
  for (int i = 0; i < n; ++i) {
    double row = 0.0;
    for (int j = 0; j < n; ++j) {
      row += Q(i, j);
      if (i != j && Q(i, j) < -1e-10 * scale) {
        throw InvalidGeneratorError("negative off-diagonal rate q(" + std::to_string(i) + "," +
                                    std::to_string(j) + ") = " + std::to_string(Q(i, j)));
      }
    }
    if (std::abs(row) > 1e-10 * scale) {
      throw InvalidGeneratorError("row " + std::to_string(i) +
                                  " is not conservative: sum = " + std::to_string(row));
    }
  }
}

bool is_irreducible(const Eigen::MatrixXd& Q) {
  const int n = static_cast<int>(Q.rows());
  if (n == 1) return true;
  auto reach_all = [&](bool transpose) {
    std::vector<bool> seen(n, false);
    std::vector<int> stack{0};
    seen[0] = true;
    int count = 1;
    while (!stack.empty()) {
      int i = stack.back();
      stack.pop_back();
      for (int j = 0; j < n; ++j) {
        double q = transpose ? Q(j, i) : Q(i, j);
        if (i != j && q > 0.0 && !seen[j]) {
          seen[j] = true;
          ++count;
          stack.push_back(j);
        }
      }
    }
    return count == n;
  };
  return reach_all(false) && reach_all(true);
}

namespace detail {

double FamilySpec::require(const std::string& key) const {
  auto it = scalars.find(key);
  if (it == scalars.end()) {
    throw ContractViolationError("family '" + name + "' needs parameter '" + key + "'");
  }
  return it->second;
}

// "name{k=v, k=[v,v], ...}"; whitespace-insensitive.
FamilySpec parse_family(const std::string& text) {
  FamilySpec spec;
  std::string s;
  for (char c : text) {
    if (!std::isspace(static_cast<unsigned char>(c))) s += c;
  }
  auto brace = s.find('{');
  if (brace == std::string::npos) {
    spec.name = s;
    return spec;
  }
  if (s.back() != '}') throw ContractViolationError("family '" + text + "': missing '}'");
  spec.name = s.substr(0, brace);
  std::string body = s.substr(brace + 1, s.size() - brace - 2);
  size_t pos = 0;
  while (pos < body.size()) {
    auto eq = body.find('=', pos);
    if (eq == std::string::npos) {
      throw ContractViolationError("family '" + text + "': expected key=value at '" +
                                   body.substr(pos) + "'");
    }
    std::string key = body.substr(pos, eq - pos);
    size_t vstart = eq + 1;
    try {
      if (vstart < body.size() && body[vstart] == '[') {
        auto close = body.find(']', vstart);
        if (close == std::string::npos) {
          throw ContractViolationError("family '" + text + "': missing ']'");
        }
        std::vector<double> vals;
        std::stringstream ss(body.substr(vstart + 1, close - vstart - 1));
        std::string item;
        while (std::getline(ss, item, ',')) vals.push_back(std::stod(item));
        spec.vectors[key] = vals;
        pos = close + 1;
      } else {
        auto comma = body.find(',', vstart);
        std::string val =
            body.substr(vstart, comma == std::string::npos ? std::string::npos : comma - vstart);
        spec.scalars[key] = std::stod(val);
        pos = comma == std::string::npos ? body.size() : comma;
      }
    } catch (const std::invalid_argument&) {
      throw ContractViolationError("family '" + text + "': bad numeric value for '" + key + "'");
    }
    if (pos < body.size() && body[pos] == ',') ++pos;
  }
  return spec;
}

}  // namespace detail

namespace {

using detail::FamilySpec;
using detail::parse_family;

// Bounded smooth spatial modulation used by *_spatial families.
double modulation(const Point& x) {
  switch (x.man.kind) {
    case ManifoldKind::Euclidean:
      return std::tanh(x.x[0]);
    case ManifoldKind::Sphere2:
      return x.x[2];
    case ManifoldKind::Torus2:
      return std::sin(x.x[0]);
  }
  return 0.0;
}

}  // namespace

RateMatrixField parse_rates(const std::string& family, const Manifold&) {
  FamilySpec spec = parse_family(family);
  RateMatrixField out;
  if (spec.name == "single") {
    out.n_states = 1;
    out.constant_in_x = true;
    out.max_total_rate = 0.0;
    out.q = [](const Point&) { return Eigen::MatrixXd::Zero(1, 1); };
    return out;
  }
  if (spec.name == "twostate") {
    double a = spec.require("a");
    if (a <= 0.0) throw ContractViolationError("twostate: a must be positive");
    Eigen::MatrixXd Q(2, 2);
    Q << -a, a, a, -a;
    out.n_states = 2;
    out.constant_in_x = true;
    out.max_total_rate = a;
    out.q = [Q](const Point&) { return Q; };
    return out;
  }
  if (spec.name == "cycle3") {
    double r = spec.require("rate");
    if (r <= 0.0) throw ContractViolationError("cycle3: rate must be positive");
    Eigen::MatrixXd Q(3, 3);
    Q << -r, r, 0.0, 0.0, -r, r, r, 0.0, -r;
    out.n_states = 3;
    out.constant_in_x = true;
    out.max_total_rate = r;
    out.q = [Q](const Point&) { return Q; };
    return out;
  }
  if (spec.name == "twostate_spatial") {
    double a0 = spec.require("a0");
    double a1 = spec.require("a1");
    if (a0 - std::abs(a1) <= 0.0) {
      throw ContractViolationError("twostate_spatial: need a0 > |a1| so rates stay positive");
    }
    out.n_states = 2;
    out.constant_in_x = false;
    out.max_total_rate = a0 + std::abs(a1);
    out.q = [a0, a1](const Point& x) {
      double q01 = a0 + a1 * modulation(x);
      Eigen::MatrixXd Q(2, 2);
      Q << -q01, q01, a0, -a0;
      return Q;
    };
    return out;
  }
  throw ContractViolationError("unknown rate family '" + spec.name + "'");
}

DriftField parse_drift(const std::string& family, const Manifold& man, int n_states) {
  FamilySpec spec = parse_family(family);
  const int d = man.dim;
  DriftField out;
  out.n_states = n_states;
  if (spec.name == "zero") {
    out.bound = 0.0;
    out.constant_in_x = true;
    out.identically_zero = true;
    out.b = [d](const Point&, int) { return Eigen::VectorXd::Zero(d); };
    return out;
  }
  if (spec.name == "pm") {
    double beta = spec.require("beta");
    if (n_states != 2) throw ContractViolationError("pm drift needs exactly 2 states");
    out.bound = std::abs(beta);
    out.constant_in_x = true;
    out.b = [beta, d](const Point&, int i) {
      Eigen::VectorXd v = Eigen::VectorXd::Zero(d);
      v[0] = (i == 0) ? beta : -beta;
      return v;
    };
    return out;
  }
  if (spec.name == "const") {
    auto it = spec.vectors.find("v");
    if (it == spec.vectors.end()) throw ContractViolationError("const drift needs v=[..]");
    if (static_cast<int>(it->second.size()) != d) {
      throw ContractViolationError("const drift: v has wrong dimension");
    }
    Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(it->second.data(), d);
    out.bound = v.norm();
    out.constant_in_x = true;
    out.identically_zero = out.bound == 0.0;
    out.b = [v](const Point&, int) { return v; };
    return out;
  }
  throw ContractViolationError("unknown drift family '" + spec.name + "'");
}

Model parse_model(const Manifold& man, const std::string& rates_family,
                  const std::string& drift_family) {
  Model m;
  m.man = man;
  m.rates = parse_rates(rates_family, man);
  std::string drift = drift_family;
  if (drift.empty()) {
    // "twostate{a,beta}" sugar: beta names the +/- drift of the two states
    FamilySpec spec = parse_family(rates_family);
    if (spec.name == "twostate" && spec.scalars.count("beta")) {
      drift = "pm{beta=" + std::to_string(spec.scalars.at("beta")) + "}";
    } else {
      drift = "zero";
    }
  }
  m.drift = parse_drift(drift, man, m.rates.n_states);
  return m;
}

}  // namespace geoldp
