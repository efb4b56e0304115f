#include "json_meta.hpp"

#include "nudgenet/io_util.hpp"

#include <fstream>
#include <sstream>

namespace nudgenet {

namespace {
constexpr std::string_view kMagic = "NGDSET01";
}

json system_to_json(const SystemSpec& s) {
  json j;
  j["name"] = s.name();
  if (s.kind == SystemKind::lorenz63) {
    j["sigma"] = s.l63.sigma;
    j["rho"] = s.l63.rho;
    j["beta"] = s.l63.beta;
  } else {
    j["forcing"] = s.l96.forcing;
    j["dim"] = s.l96.dim;
  }
  return j;
}

SystemSpec system_from_json(const json& j) {
  SystemSpec s;
  const auto name = j.at("name").get<std::string>();
  if (name == "lorenz63") {
    s.kind = SystemKind::lorenz63;
    s.l63.sigma = j.at("sigma").get<double>();
    s.l63.rho = j.at("rho").get<double>();
    s.l63.beta = j.at("beta").get<double>();
  } else if (name == "lorenz96") {
    s.kind = SystemKind::lorenz96;
    s.l96.forcing = j.at("forcing").get<double>();
    s.l96.dim = j.at("dim").get<int>();
  } else {
    throw FormatError("unknown system '" + name + "'");
  }
  return s;
}

json dataset_meta_to_json(const DatasetMeta& m) {
  json j;
  j["system"] = system_to_json(m.system);
  j["mu"] = m.mu;
  j["delta"] = m.delta;
  j["innovation"] = m.innovation;
  j["observed_indices"] = m.observed_indices;
  j["state_dim"] = m.state_dim;
  j["windows"] = m.windows;
  j["n_refs"] = m.n_refs;
  j["seed"] = m.seed;
  j["config_hash"] = m.config_hash;
  j["ensemble_hash"] = m.ensemble_hash;
  j["sample_source"] = m.sample_source;
  return j;
}

DatasetMeta dataset_meta_from_json(const json& j) {
  DatasetMeta m;
  m.system = system_from_json(j.at("system"));
  m.mu = j.at("mu").get<double>();
  m.delta = j.at("delta").get<double>();
  m.innovation = j.value("innovation", "frozen_state");
  m.observed_indices = j.at("observed_indices").get<std::vector<int>>();
  m.state_dim = j.at("state_dim").get<int>();
  m.windows = j.at("windows").get<int>();
  m.n_refs = j.at("n_refs").get<int>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.config_hash = j.value("config_hash", "");
  m.ensemble_hash = j.value("ensemble_hash", "");
  m.sample_source = j.value("sample_source", "");
  return m;
}

std::string serialize_dataset(const Dataset& data) {
  std::ostringstream os;
  const std::string header = dataset_meta_to_json(data.meta).dump(2);
  io::write_bytes(os, kMagic);
  io::write_u64(os, header.size());
  io::write_bytes(os, header);
  const auto in_dim = static_cast<std::size_t>(data.input_dim());
  const auto out_dim = static_cast<std::size_t>(data.output_dim());
  io::write_u64(os, data.samples.size());
  io::write_u64(os, in_dim);
  io::write_u64(os, out_dim);
  std::vector<double> row(2 + in_dim + out_dim);
  for (const auto& s : data.samples) {
    row[0] = s.ref_id;
    row[1] = s.window;
    std::copy(s.input.begin(), s.input.end(), row.begin() + 2);
    std::copy(s.output.begin(), s.output.end(), row.begin() + 2 + static_cast<std::ptrdiff_t>(in_dim));
    io::write_f64s(os, row);
  }
  return os.str();
}

void save_dataset(const std::filesystem::path& path, const Dataset& data) {
  io::write_file(path, serialize_dataset(data));
}

std::string dataset_hash(const Dataset& data) { return hash_bytes(serialize_dataset(data)); }

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw FormatError("cannot open dataset " + path.string());
  }
  if (io::read_bytes(in, kMagic.size()) != kMagic) {
    throw FormatError("dataset: bad magic in " + path.string());
  }
  const auto header_len = io::read_u64(in);
  if (header_len > (1u << 24)) {
    throw FormatError("dataset: implausible header length");
  }
  Dataset data;
  try {
    data.meta = dataset_meta_from_json(json::parse(io::read_bytes(in, header_len)));
  } catch (const json::exception& e) {
    throw FormatError(std::string("dataset: bad metadata: ") + e.what());
  }
  const auto n = io::read_u64(in);
  const auto in_dim = io::read_u64(in);
  const auto out_dim = io::read_u64(in);
  std::vector<double> row(2 + in_dim + out_dim);
  data.samples.reserve(n);
  for (std::uint64_t k = 0; k < n; ++k) {
    io::read_f64s(in, row);
    TrainingSample s;
    s.ref_id = static_cast<int>(row[0]);
    s.window = static_cast<int>(row[1]);
    s.input = Eigen::Map<const Eigen::VectorXd>(row.data() + 2, static_cast<Eigen::Index>(in_dim));
    s.output = Eigen::Map<const Eigen::VectorXd>(row.data() + 2 + in_dim,
                                                 static_cast<Eigen::Index>(out_dim));
    data.samples.push_back(std::move(s));
  }
  return data;
}

std::string dataset_to_csv(const Dataset& data) {
  std::string out = "ref_id,window";
  for (int i = 1; i <= data.input_dim(); ++i) out += ",in" + std::to_string(i);
  for (int i = 1; i <= data.output_dim(); ++i) out += ",out" + std::to_string(i);
  out += '\n';
  for (const auto& s : data.samples) {
    out += std::to_string(s.ref_id) + ',' + std::to_string(s.window);
    for (double v : s.input) out += ',' + io::format_double(v);
    for (double v : s.output) out += ',' + io::format_double(v);
    out += '\n';
  }
  return out;
}

}  // namespace nudgenet
