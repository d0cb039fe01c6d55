#include "metabayes/harness/checkpoint.hpp"

#include <cstdio>
#include <cstdlib>

#include <json.hpp>

#include "metabayes/errors.hpp"
#include "metabayes/harness/metrics.hpp"

namespace metabayes {

using json = nlohmann::json;

std::string hex_double(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

double parse_hex_double(const std::string& text) {
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (text.empty() || end != text.c_str() + text.size()) throw ValidationError("bad float literal '" + text + "'");
  return v;
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

json tensors_json(const MetaParams& p) {
  json arr = json::array();
  for (std::size_t i = 0; i < p.size(); ++i) {
    json values = json::array();
    const Matrix& m = p[i];
    for (Eigen::Index k = 0; k < m.size(); ++k) values.push_back(hex_double(m.data()[k]));
    arr.push_back({{"name", p.name(i)}, {"rows", m.rows()}, {"cols", m.cols()}, {"values", std::move(values)}});
  }
  return arr;
}

MetaParams tensors_from_json(const json& arr) {
  MetaParams p;
  for (const json& t : arr) {
    const auto rows = t.at("rows").get<Eigen::Index>();
    const auto cols = t.at("cols").get<Eigen::Index>();
    const json& values = t.at("values");
    if (static_cast<Eigen::Index>(values.size()) != rows * cols) {
      throw ValidationError("tensor '" + t.at("name").get<std::string>() + "' has the wrong number of values");
    }
    Matrix m(rows, cols);
    for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = parse_hex_double(values[k].get<std::string>());
    const std::size_t i = p.add(t.at("name").get<std::string>(), rows, cols);
    p.assign(i, m);
  }
  return p;
}

json rng_json(const SeededRng::State& s) { return {{"seed", s.seed}, {"stream", s.stream}, {"counter", s.counter}}; }

SeededRng::State rng_from_json(const json& j) {
  return {j.at("seed").get<std::uint64_t>(), j.at("stream").get<std::uint64_t>(), j.at("counter").get<std::uint64_t>()};
}

json optimizer_json(const OptimizerState& s) {
  return {{"kind", s.settings.kind == OptimizerKind::adam ? "adam" : "sgd"},
          {"learning_rate", hex_double(s.settings.learning_rate)},
          {"beta1", hex_double(s.settings.beta1)},
          {"beta2", hex_double(s.settings.beta2)},
          {"epsilon", hex_double(s.settings.epsilon)},
          {"step", s.step},
          {"first_moment", tensors_json(s.first_moment)},
          {"second_moment", tensors_json(s.second_moment)}};
}

OptimizerState optimizer_from_json(const json& j) {
  OptimizerState s;
  const auto kind = j.at("kind").get<std::string>();
  if (kind != "adam" && kind != "sgd") throw ValidationError("unknown optimizer kind '" + kind + "'");
  s.settings.kind = kind == "adam" ? OptimizerKind::adam : OptimizerKind::sgd;
  s.settings.learning_rate = parse_hex_double(j.at("learning_rate").get<std::string>());
  s.settings.beta1 = parse_hex_double(j.at("beta1").get<std::string>());
  s.settings.beta2 = parse_hex_double(j.at("beta2").get<std::string>());
  s.settings.epsilon = parse_hex_double(j.at("epsilon").get<std::string>());
  s.step = j.at("step").get<std::uint64_t>();
  s.first_moment = tensors_from_json(j.at("first_moment"));
  s.second_moment = tensors_from_json(j.at("second_moment"));
  return s;
}

json hex_row(std::initializer_list<double> xs) {
  json row = json::array();
  for (double x : xs) row.push_back(hex_double(x));
  return row;
}

double hex_at(const json& row, std::size_t i) { return parse_hex_double(row.at(i).get<std::string>()); }

json state_json(const SupervisedState& s) {
  json rows = json::array();
  for (const CurveRow& r : s.curve.rows) {
    rows.push_back({{"step", r.step}, {"values", hex_row({r.train_nll, r.eval_nll, r.oracle_nll, r.mean_kl})}});
  }
  return {{"type", "supervised"},
          {"step", s.step},
          {"rng", rng_json(s.batch_rng)},
          {"params_version", s.params.version()},
          {"parameters", tensors_json(s.params)},
          {"optimizer", optimizer_json(s.optimizer)},
          {"curve", rows},
          {"warnings", s.curve.warnings},
          {"interval_loss", hex_double(s.interval_loss)},
          {"interval_count", s.interval_count}};
}

json state_json(const BanditState& s) {
  json rows = json::array();
  for (const RlCurveRow& r : s.curve.rows) {
    rows.push_back({{"batch", r.batch}, {"values", hex_row({r.mean_return, r.oracle_value, r.frac_optimal})}});
  }
  return {{"type", "bandit"},
          {"step", s.update},
          {"rng", rng_json(s.rng)},
          {"params_version", s.params.version()},
          {"parameters", tensors_json(s.params)},
          {"optimizer", optimizer_json(s.optimizer)},
          {"curve", rows},
          {"warnings", s.curve.warnings}};
}

SupervisedState supervised_from_json(const json& j) {
  SupervisedState s;
  s.step = j.at("step").get<int>();
  s.batch_rng = rng_from_json(j.at("rng"));
  s.params = tensors_from_json(j.at("parameters"));
  s.params.set_version(j.at("params_version").get<std::uint64_t>());
  s.optimizer = optimizer_from_json(j.at("optimizer"));
  for (const json& r : j.at("curve")) {
    const json& v = r.at("values");
    s.curve.rows.push_back({r.at("step").get<int>(), hex_at(v, 0), hex_at(v, 1), hex_at(v, 2), hex_at(v, 3)});
  }
  s.curve.warnings = j.at("warnings").get<std::vector<std::string>>();
  s.interval_loss = parse_hex_double(j.at("interval_loss").get<std::string>());
  s.interval_count = j.at("interval_count").get<int>();
  return s;
}

BanditState bandit_from_json(const json& j) {
  BanditState s;
  s.update = j.at("step").get<int>();
  s.rng = rng_from_json(j.at("rng"));
  s.params = tensors_from_json(j.at("parameters"));
  s.params.set_version(j.at("params_version").get<std::uint64_t>());
  s.optimizer = optimizer_from_json(j.at("optimizer"));
  for (const json& r : j.at("curve")) {
    const json& v = r.at("values");
    s.curve.rows.push_back({r.at("batch").get<int>(), hex_at(v, 0), hex_at(v, 1), hex_at(v, 2)});
  }
  s.curve.warnings = j.at("warnings").get<std::vector<std::string>>();
  return s;
}

std::string checksum_text(const json& body) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "fnv1a64:%016llx", static_cast<unsigned long long>(fnv1a64(body.dump())));
  return buf;
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& c) {
  json body;
  body["format_version"] = c.format_version;
  body["config"] = c.config;
  body["state"] = std::visit([](const auto& s) { return state_json(s); }, c.state);
  body["checksum"] = checksum_text(body);
  return body.dump(1) + "\n";
}

Checkpoint parse_checkpoint(const std::string& text) {
  json body;
  try {
    body = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(0, std::string("checkpoint is not valid JSON: ") + e.what());
  }
  try {
    if (!body.is_object() || !body.contains("checksum")) throw ValidationError("checkpoint has no checksum");
    const std::string stored = body.at("checksum").get<std::string>();
    body.erase("checksum");
    if (checksum_text(body) != stored) throw ValidationError("checkpoint checksum mismatch");
    Checkpoint c;
    c.format_version = body.at("format_version").get<int>();
    if (c.format_version != kCheckpointFormatVersion) {
      throw ValidationError("unsupported checkpoint format version " + std::to_string(c.format_version));
    }
    c.config = body.at("config").get<std::map<std::string, std::string>>();
    const json& state = body.at("state");
    const auto type = state.at("type").get<std::string>();
    if (type == "supervised") c.state = supervised_from_json(state);
    else if (type == "bandit") c.state = bandit_from_json(state);
    else throw ValidationError("unknown checkpoint state type '" + type + "'");
    return c;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed checkpoint: ") + e.what());
  } catch (const ContractViolation& e) {
    throw ValidationError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_checkpoint(checkpoint));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return parse_checkpoint(read_file(path)); }

}  // namespace metabayes
