#pragma once

// JSON and CSV formats. Link numbers written to files are 1-based; the
// library API is 0-based.

#include <cstdint>
#include <fstream>
#include <algorithm>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "jpac/bench.hpp"
#include "jpac/channel.hpp"
#include "jpac/deflation.hpp"
#include "jpac/oracle.hpp"

namespace jpac::io {

using nlohmann::json;

/// A network plus its sample set, as stored in an instance file.
struct Instance {
  NominalChannel nominal;
  SampleSet samples;
  std::uint64_t seed = 0;
  double gamma_db = 2.0;
  double noise_dbm = -90.0;
};

inline json to_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

inline json to_json(const Matrix& m) {
  json out = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(std::move(row));
  }
  return out;
}

inline Vector vector_from_json(const json& j, std::size_t expected, const char* what) {
  if (!j.is_array() || j.size() != expected)
    throw std::runtime_error(std::string("instance: '") + what + "' must be an array of length " +
                             std::to_string(expected));
  Vector v(static_cast<Eigen::Index>(expected));
  for (std::size_t i = 0; i < expected; ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  return v;
}

inline Matrix matrix_from_json(const json& j, std::size_t rows, std::size_t cols, const char* what) {
  if (!j.is_array() || j.size() != rows)
    throw std::runtime_error(std::string("instance: '") + what + "' has the wrong number of rows");
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r)
    m.row(static_cast<Eigen::Index>(r)) = vector_from_json(j[r], cols, what).transpose();
  return m;
}

inline json instance_to_json(const Instance& inst) {
  json j;
  j["k"] = inst.nominal.K;
  j["n"] = inst.samples.N;
  j["spread"] = inst.samples.spread;
  j["seed"] = inst.seed;
  j["gamma_db"] = inst.gamma_db;
  j["noise_dbm"] = inst.noise_dbm;
  j["gains_hat"] = to_json(inst.nominal.gains_hat);
  j["noise_hat"] = to_json(inst.nominal.noise_hat);
  j["budget"] = to_json(inst.nominal.budget);
  json gains = json::array();
  json noise = json::array();
  for (std::size_t n = 0; n < inst.samples.N; ++n) {
    gains.push_back(to_json(inst.samples.gains[n]));
    noise.push_back(to_json(inst.samples.noise[n]));
  }
  j["samples"] = {{"gains", std::move(gains)}, {"noise", std::move(noise)}};
  if (!inst.nominal.positions.empty()) {
    json pos = json::array();
    for (const auto& p : inst.nominal.positions) pos.push_back({{"tx", {p.tx.x, p.tx.y}}, {"rx", {p.rx.x, p.rx.y}}});
    j["positions"] = std::move(pos);
  }
  return j;
}

/// Parses and validates an instance document. Throws std::runtime_error
/// with a readable message on any schema or value problem.
inline Instance instance_from_json(const json& j) {
  try {
    Instance inst;
    const auto K = j.at("k").get<std::size_t>();
    const auto N = j.at("n").get<std::size_t>();
    if (K < 1 || N < 1) throw std::runtime_error("instance: k and n must be >= 1");
    inst.seed = j.value("seed", std::uint64_t{0});
    inst.gamma_db = j.at("gamma_db").get<double>();
    inst.noise_dbm = j.value("noise_dbm", -90.0);

    auto& nom = inst.nominal;
    nom.K = K;
    nom.gains_hat = matrix_from_json(j.at("gains_hat"), K, K, "gains_hat");
    nom.noise_hat = vector_from_json(j.at("noise_hat"), K, "noise_hat");
    nom.budget = vector_from_json(j.at("budget"), K, "budget");
    nom.sinr_target = Vector::Constant(static_cast<Eigen::Index>(K), db_to_linear(inst.gamma_db));
    if (j.contains("positions")) {
      for (const auto& p : j.at("positions"))
        nom.positions.push_back({{p.at("tx").at(0).get<double>(), p.at("tx").at(1).get<double>()},
                                 {p.at("rx").at(0).get<double>(), p.at("rx").at(1).get<double>()}});
    }
    nom.validate();

    auto& s = inst.samples;
    s.K = K;
    s.N = N;
    s.spread = j.value("spread", 0.0);
    const json& samples = j.at("samples");
    const json& gains = samples.at("gains");
    const json& noise = samples.at("noise");
    if (!gains.is_array() || gains.size() != N || !noise.is_array() || noise.size() != N)
      throw std::runtime_error("instance: samples must hold n gain matrices and n noise vectors");
    for (std::size_t n = 0; n < N; ++n) {
      s.gains.push_back(matrix_from_json(gains[n], K, K, "samples.gains"));
      s.noise.push_back(vector_from_json(noise[n], K, "samples.noise"));
    }
    s.validate();
    return inst;
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("instance: malformed document: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(std::string("instance: ") + e.what());
  }
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error("'" + path + "' is not valid JSON: " + e.what());
  }
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << text;
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

inline Instance read_instance(const std::string& path) { return instance_from_json(read_json_file(path)); }

/// nlohmann/json prints doubles with the shortest representation that
/// parses back to the same value, so files round-trip bit-exactly.
inline void write_instance(const std::string& path, const Instance& inst) {
  write_text_file(path, instance_to_json(inst).dump(1) + "\n");
}

inline json one_based(const LinkSet& set) {
  json out = json::array();
  for (auto k : set) out.push_back(k + 1);
  return out;
}

inline json deflation_to_json(const DeflationResult& r, const Vector& budget) {
  json j;
  j["supported"] = one_based(r.supported);
  json q = json::array();
  json watts = json::array();
  for (std::size_t a = 0; a < r.supported.size(); ++a) {
    const double qa = r.q(static_cast<Eigen::Index>(a));
    q.push_back(qa);
    watts.push_back(qa * budget(static_cast<Eigen::Index>(r.supported[a])));
  }
  j["q"] = std::move(q);
  j["power_w"] = std::move(watts);
  j["total_power_w"] = r.total_power;
  json removals = json::array();
  for (const auto& rm : r.removals)
    removals.push_back({{"link", rm.link + 1}, {"phase", std::string(to_string(rm.phase))}, {"score", rm.score}});
  j["removals"] = std::move(removals);
  j["readmitted"] = one_based(r.readmitted);
  j["stage_objectives"] = r.stage_objectives;
  j["wall_time_s"] = r.wall_time;
  return j;
}

inline json oracle_to_json(const OracleResult& r) {
  json j;
  j["m_star"] = r.m_star;
  json sets = json::array();
  json powers = json::array();
  for (const auto& s : r.best_sets) {
    sets.push_back(one_based(s));
    powers.push_back({{"set", one_based(s)}, {"power_w", r.power_per_set.at(s)}});
  }
  j["best_sets"] = std::move(sets);
  j["min_power_w"] = r.min_power;
  j["power_per_set"] = std::move(powers);
  return j;
}

inline std::string format_fixed(double v, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

/// Columns k,spread,run,seed,algo,supported,power_w,time_s.
inline std::string records_to_csv(const std::vector<BenchRecord>& records) {
  std::ostringstream os;
  os << "k,spread,run,seed,algo,supported,power_w,time_s\n";
  for (const auto& r : records) {
    os << r.K << ',' << r.spread << ',' << r.run << ',' << r.seed << ',' << to_string(r.algo) << ',' << r.supported
       << ',' << std::setprecision(17) << r.power_w << std::defaultfloat << std::setprecision(6) << ','
       << format_fixed(r.time_s, 3) << '\n';
  }
  return os.str();
}

inline json summary_to_json(const BenchSummary& summary, const BenchConfig& config) {
  json cells = json::array();
  for (const auto& c : summary.cells) {
    cells.push_back({{"k", c.K},
                     {"spread", c.spread},
                     {"algo", std::string(to_string(c.algo))},
                     {"runs", c.runs},
                     {"distribution", c.distribution},
                     {"mean_supported", c.mean_supported},
                     {"mean_power_w", c.mean_power},
                     {"mean_time_s", c.mean_time}});
  }
  return {{"master_seed", config.master_seed},
          {"samples", config.sample_count()},
          {"runs", config.runs},
          {"cells", std::move(cells)}};
}

/// Two-column series "x y" with x = K, one file per (quantity, S, algorithm).
/// Keys are file names, values are file contents.
inline std::map<std::string, std::string> figure_data(const BenchSummary& summary) {
  std::map<std::string, std::string> files;
  struct Quantity {
    const char* name;
    double BenchCell::*field;
  };
  const Quantity quantities[] = {{"supported", &BenchCell::mean_supported},
                                 {"power", &BenchCell::mean_power},
                                 {"time", &BenchCell::mean_time}};
  std::vector<const BenchCell*> cells;
  for (const auto& c : summary.cells) cells.push_back(&c);
  std::stable_sort(cells.begin(), cells.end(), [](const BenchCell* a, const BenchCell* b) { return a->K < b->K; });
  for (const auto& qty : quantities) {
    for (const BenchCell* c : cells) {
      std::ostringstream name;
      name << "fig_" << qty.name << "_S" << c->spread << '_' << to_string(c->algo) << ".dat";
      auto& text = files[name.str()];
      if (text.empty()) text = std::string("# K mean_") + qty.name + "\n";
      std::ostringstream line;
      line << c->K << ' ' << std::setprecision(17) << c->*qty.field << '\n';
      text += line.str();
    }
  }
  return files;
}

}  // namespace jpac::io
