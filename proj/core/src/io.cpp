#include "termctl/io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "termctl/error.hpp"

namespace termctl {

std::string format_double(double x) {
  if (!std::isfinite(x)) return std::isnan(x) ? "nan" : (x > 0 ? "inf" : "-inf");
  return fmt::format("{:.17g}", x);
}

void write_chain_csv(std::ostream& out, const ChainOutput& output) {
  out << 't';
  for (Eigen::Index j = 0; j < output.d(); ++j) out << ",f" << (j + 1);
  out << '\n';
  const auto& v = output.values();
  for (Eigen::Index t = 0; t < output.T(); ++t) {
    out << (t + 1);
    for (Eigen::Index j = 0; j < output.d(); ++j) out << ',' << format_double(v(t, j));
    out << '\n';
  }
}

void write_chain_csv(const std::string& path, const ChainOutput& output) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorCode::Io, "cannot open " + path + " for writing");
  write_chain_csv(out, output);
}

ChainOutput read_chain_csv(std::istream& in, std::string label) {
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorCode::Io, "empty chain CSV");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  // header: t,f1,...,fd
  std::size_t d = 0;
  {
    std::stringstream hs(line);
    std::string cell;
    std::size_t col = 0;
    while (std::getline(hs, cell, ',')) {
      if (col == 0)
        require(cell == "t", ErrorCode::Io, "chain CSV header must start with 't'");
      else
        require(cell == "f" + std::to_string(col), ErrorCode::Io,
                "unexpected chain CSV header cell '" + cell + "'");
      ++col;
    }
    require(col >= 2, ErrorCode::Io, "chain CSV needs at least one feature column");
    d = col - 1;
  }

  std::vector<double> data;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ls(line);
    std::string cell;
    std::size_t col = 0;
    while (std::getline(ls, cell, ',')) {
      if (col > 0) {
        try {
          std::size_t used = 0;
          data.push_back(std::stod(cell, &used));
          require(used == cell.size(), ErrorCode::Io, "trailing characters in '" + cell + "'");
        } catch (const std::logic_error&) {
          throw Error(ErrorCode::Io, "cannot parse '" + cell + "' on data row " +
                                         std::to_string(rows + 1));
        }
      }
      ++col;
    }
    require(col == d + 1, ErrorCode::Io,
            "row " + std::to_string(rows + 1) + " has " + std::to_string(col) + " cells");
    ++rows;
  }
  require(rows >= 1, ErrorCode::Io, "chain CSV has no data rows");
  RowMatrix m = Eigen::Map<RowMatrix>(data.data(), static_cast<Eigen::Index>(rows),
                                      static_cast<Eigen::Index>(d));
  return ChainOutput(std::move(m), 0, std::move(label));
}

ChainOutput read_chain_csv(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::Io, "cannot open " + path);
  return read_chain_csv(in, path);
}

std::string moment_class_name(MomentClass c) {
  switch (c) {
    case MomentClass::PolynomialMoments: return "POLYNOMIAL_MOMENTS";
    case MomentClass::ExponentialMoments: return "EXPONENTIAL_MOMENTS";
    case MomentClass::Bounded: return "BOUNDED";
  }
  return "POLYNOMIAL_MOMENTS";
}

MomentClass moment_class_from_name(const std::string& name) {
  if (name == "POLYNOMIAL_MOMENTS") return MomentClass::PolynomialMoments;
  if (name == "EXPONENTIAL_MOMENTS") return MomentClass::ExponentialMoments;
  if (name == "BOUNDED") return MomentClass::Bounded;
  throw Error(ErrorCode::Io, "unknown moment_class '" + name + "'");
}

Json regime_to_json(const RegimeParams& params) {
  Json j;
  if (const auto* g = std::get_if<GeometricDriftSpec>(&params.drift)) {
    j["drift"] = Json{{"kind", "geometric"},
                      {"lambda", g->lambda},
                      {"b", g->b},
                      {"upsilon_C", g->upsilon_C},
                      {"m0", g->m0}};
  } else {
    const auto& p = std::get<PolynomialDriftSpec>(params.drift);
    j["drift"] = Json{{"kind", "polynomial"}, {"c", p.c},   {"b", p.b},
                      {"eta", p.eta},          {"upsilon_C", p.upsilon_C}, {"m0", p.m0}};
  }
  j["minorisation"] = Json{{"alpha", params.minorisation.alpha}, {"m0", params.minorisation.m0}};
  j["moments"] = Json{{"p", params.moments.p},
                      {"epsilon", params.moments.epsilon},
                      {"M", params.moments.M},
                      {"moment_class", moment_class_name(params.moments.moment_class)},
                      {"M_estimated", params.moments.M_estimated}};
  j["dim_state"] = params.dim_state;
  j["dim_feature"] = params.dim_feature;
  j["a"] = params.a;
  j["trace_ratio"] = params.trace_ratio;
  j["sigma0"] = params.sigma0;
  j["theta0"] = params.theta0;
  j["eps_bar"] = params.eps_bar;
  return j;
}

RegimeParams regime_from_json(const Json& j) {
  try {
    RegimeParams r;
    const auto& drift = j.at("drift");
    const auto kind = drift.at("kind").get<std::string>();
    if (kind == "geometric") {
      GeometricDriftSpec g;
      g.lambda = drift.at("lambda").get<double>();
      g.b = drift.at("b").get<double>();
      g.upsilon_C = drift.at("upsilon_C").get<double>();
      g.m0 = drift.value("m0", 1);
      r.drift = g;
    } else if (kind == "polynomial") {
      PolynomialDriftSpec p;
      p.c = drift.at("c").get<double>();
      p.b = drift.at("b").get<double>();
      p.eta = drift.at("eta").get<double>();
      p.upsilon_C = drift.at("upsilon_C").get<double>();
      p.m0 = drift.value("m0", 1);
      r.drift = p;
    } else {
      throw Error(ErrorCode::Io, "drift kind must be geometric or polynomial, got '" + kind + "'");
    }
    const auto& mino = j.at("minorisation");
    r.minorisation.alpha = mino.at("alpha").get<double>();
    r.minorisation.m0 = mino.value("m0", 1);
    const auto& mom = j.at("moments");
    r.moments.p = mom.at("p").get<double>();
    r.moments.epsilon = mom.at("epsilon").get<double>();
    r.moments.M = mom.at("M").get<double>();
    r.moments.moment_class =
        moment_class_from_name(mom.value("moment_class", std::string("POLYNOMIAL_MOMENTS")));
    r.moments.M_estimated = mom.value("M_estimated", false);
    r.dim_state = j.value("dim_state", 1);
    r.dim_feature = j.value("dim_feature", 1);
    r.a = j.value("a", 1.0);
    r.trace_ratio = j.value("trace_ratio", 1.0);
    r.sigma0 = j.value("sigma0", 1.0);
    r.theta0 = j.value("theta0", 0.25);
    r.eps_bar = j.value("eps_bar", 0.0);
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Io, std::string("malformed regime JSON: ") + e.what());
  }
}

RegimeParams read_regime_file(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::Io, "cannot open " + path);
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Io, std::string("cannot parse ") + path + ": " + e.what());
  }
  return regime_from_json(j);
}

Json matrix_to_json(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace {

void dump_into(const Json& j, std::string& out, int indent, int depth) {
  const auto newline = [&](int level) {
    if (indent < 0) return;
    out += '\n';
    out.append(static_cast<std::size_t>(indent * level), ' ');
  };
  switch (j.type()) {
    case Json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += '{';
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += ',';
        first = false;
        newline(depth + 1);
        out += Json(it.key()).dump();
        out += indent < 0 ? ":" : ": ";
        dump_into(it.value(), out, indent, depth + 1);
      }
      newline(depth);
      out += '}';
      return;
    }
    case Json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      out += '[';
      bool first = true;
      for (const auto& v : j) {
        if (!first) out += ',';
        first = false;
        newline(depth + 1);
        dump_into(v, out, indent, depth + 1);
      }
      newline(depth);
      out += ']';
      return;
    }
    case Json::value_t::number_float: {
      const double x = j.get<double>();
      out += std::isfinite(x) ? format_double(x) : "null";
      return;
    }
    default:
      out += j.dump();
  }
}

}  // namespace

std::string dump_json(const Json& j, int indent) {
  std::string out;
  dump_into(j, out, indent, 0);
  return out;
}

}  // namespace termctl
