// Copyright 2026 The SRPO Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "srpo/checkpoint.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "srpo/vocab.hpp"

namespace srpo {

namespace {

void write_array(std::ostream& out, std::span<const double> v) {
  out << '[';
  char buf[32];
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out << ',';
    std::snprintf(buf, sizeof buf, "%.17g", v[i]);
    out << buf;
  }
  out << ']';
}

nlohmann::json hyper_to_json(const optimize::OptimizerConfig& h) {
  return {{"lr", h.lr},     {"beta1", h.beta1},
          {"beta2", h.beta2}, {"eps", h.eps},
          {"weight_decay", h.weight_decay}, {"epochs_per_batch", h.epochs_per_batch}};
}

optimize::OptimizerConfig hyper_from_json(const nlohmann::json& j) {
  optimize::OptimizerConfig h;
  h.lr = j.at("lr").get<double>();
  h.beta1 = j.at("beta1").get<double>();
  h.beta2 = j.at("beta2").get<double>();
  h.eps = j.at("eps").get<double>();
  h.weight_decay = j.at("weight_decay").get<double>();
  h.epochs_per_batch = j.at("epochs_per_batch").get<int>();
  return h;
}

std::uint64_t checksum(const Checkpoint& c) {
  Fnv1a h;
  h.update(static_cast<std::uint64_t>(c.format_version));
  h.update(dims_to_json(c.params.dims()).dump());
  h.update(c.vocab_hash);
  h.update(c.cfg_hash);
  h.update(static_cast<std::uint64_t>(c.step));
  h.update(c.rng_epoch);
  h.update(c.config.dump());
  h.update(c.params.theta());
  if (c.optimizer) {
    h.update(static_cast<std::uint64_t>(c.optimizer->step));
    h.update(hyper_to_json(c.optimizer->hyper).dump());
    h.update(std::span<const double>(c.optimizer->m));
    h.update(std::span<const double>(c.optimizer->v));
  }
  return h.digest();
}

}  // namespace

nlohmann::json dims_to_json(const policy::Dims& d) {
  return {{"vocab_size", d.vocab_size}, {"embed_dim", d.embed_dim},
          {"hidden_dim", d.hidden_dim}, {"max_rows", d.max_rows},
          {"max_cols", d.max_cols},     {"context_len", d.context_len},
          {"eos", d.eos}};
}

policy::Dims dims_from_json(const nlohmann::json& j) {
  policy::Dims d;
  d.vocab_size = j.at("vocab_size").get<int>();
  d.embed_dim = j.at("embed_dim").get<int>();
  d.hidden_dim = j.at("hidden_dim").get<int>();
  d.max_rows = j.at("max_rows").get<int>();
  d.max_cols = j.at("max_cols").get<int>();
  d.context_len = j.at("context_len").get<int>();
  d.eos = j.at("eos").get<int>();
  return d;
}

void save_checkpoint(const std::string& path, const Checkpoint& c) {
  std::ostringstream out;
  out << "{\"format_version\":" << c.format_version;
  out << ",\"dims\":" << dims_to_json(c.params.dims()).dump();
  out << ",\"vocab_hash\":\"" << to_hex(c.vocab_hash) << '"';
  out << ",\"cfg_hash\":\"" << to_hex(c.cfg_hash) << '"';
  out << ",\"step\":" << c.step;
  out << ",\"rng_epoch\":" << c.rng_epoch;
  out << ",\"config\":" << c.config.dump();
  out << ",\n\"theta\":";
  write_array(out, c.params.theta());
  out << ",\n\"optimizer\":";
  if (c.optimizer) {
    out << "{\"step\":" << c.optimizer->step;
    out << ",\"hyper\":" << hyper_to_json(c.optimizer->hyper).dump();
    out << ",\n\"m\":";
    write_array(out, c.optimizer->m);
    out << ",\n\"v\":";
    write_array(out, c.optimizer->v);
    out << '}';
  } else {
    out << "null";
  }
  out << ",\n\"checksum\":\"" << to_hex(checksum(c)) << "\"}\n";

  const std::filesystem::path target(path);
  if (target.has_parent_path()) std::filesystem::create_directories(target.parent_path());
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open checkpoint for writing: " + tmp);
    f << out.str();
    f.flush();
    if (!f) throw std::runtime_error("checkpoint write failed: " + tmp);
  }
  std::filesystem::rename(tmp, target);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IntegrityError("cannot open checkpoint: " + path);
  std::stringstream buf;
  buf << f.rdbuf();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(buf.str());
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError("unreadable checkpoint " + path + ": " + e.what());
  }
  Checkpoint c;
  std::string stored_sum;
  try {
    c.format_version = j.at("format_version").get<int>();
    if (c.format_version != kCheckpointFormatVersion) {
      throw IntegrityError("unsupported checkpoint format version " +
                           std::to_string(c.format_version));
    }
    const policy::Dims dims = dims_from_json(j.at("dims"));
    dims.validate();
    auto theta = j.at("theta").get<std::vector<double>>();
    if (theta.size() != dims.param_count()) {
      throw IntegrityError("checkpoint parameter count does not match its dimensions");
    }
    c.params = policy::PolicyParams(dims, std::move(theta));
    c.vocab_hash = from_hex(j.at("vocab_hash").get<std::string>());
    c.cfg_hash = from_hex(j.at("cfg_hash").get<std::string>());
    c.step = j.at("step").get<std::int64_t>();
    c.rng_epoch = j.at("rng_epoch").get<std::uint64_t>();
    c.config = j.at("config");
    const auto& o = j.at("optimizer");
    if (!o.is_null()) {
      optimize::OptimizerState st;
      st.step = o.at("step").get<std::int64_t>();
      st.hyper = hyper_from_json(o.at("hyper"));
      st.m = o.at("m").get<std::vector<double>>();
      st.v = o.at("v").get<std::vector<double>>();
      if (st.m.size() != c.params.size() || st.v.size() != c.params.size()) {
        throw IntegrityError("checkpoint optimizer state has the wrong length");
      }
      c.optimizer = std::move(st);
    }
    stored_sum = j.at("checksum").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError("malformed checkpoint " + path + ": " + e.what());
  } catch (const ConfigError& e) {
    throw IntegrityError("malformed checkpoint " + path + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw IntegrityError("malformed checkpoint " + path + ": " + e.what());
  }
  if (from_hex(stored_sum) != checksum(c)) {
    throw IntegrityError("checkpoint checksum mismatch: " + path);
  }
  if (c.vocab_hash != Vocabulary::hash()) {
    throw IntegrityError("checkpoint was written with a different vocabulary");
  }
  return c;
}

}  // namespace srpo
