#include "nudgenet/model.hpp"

#include "nudgenet/io_util.hpp"

#include <fstream>
#include <sstream>

namespace nudgenet {

using nlohmann::json;

namespace {
constexpr std::string_view kMagic = "NGMODEL1";

std::vector<double> to_vec(const Eigen::VectorXd& v) { return {v.begin(), v.end()}; }

Eigen::VectorXd from_vec(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}
}  // namespace

Standardizer Standardizer::identity(int n_in, int n_out) {
  return {Eigen::VectorXd::Zero(n_in), Eigen::VectorXd::Ones(n_in), Eigen::VectorXd::Zero(n_out),
          Eigen::VectorXd::Ones(n_out)};
}

Standardizer Standardizer::fit(const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets) {
  auto stats = [](const Eigen::MatrixXd& m, Eigen::VectorXd& mean, Eigen::VectorXd& scale) {
    const double n = static_cast<double>(m.cols());
    mean = m.rowwise().sum() / n;
    scale = ((m.colwise() - mean).array().square().rowwise().sum() / n).sqrt().matrix();
    for (Eigen::Index i = 0; i < scale.size(); ++i) {
      if (!(scale[i] > 1e-12)) {
        scale[i] = 1.0;
      }
    }
  };
  Standardizer s;
  stats(inputs, s.in_mean, s.in_scale);
  stats(targets, s.out_mean, s.out_scale);
  return s;
}

Eigen::MatrixXd Standardizer::to_net_inputs(const Eigen::MatrixXd& x) const {
  return (x.colwise() - in_mean).array().colwise() / in_scale.array();
}

Eigen::MatrixXd Standardizer::to_net_targets(const Eigen::MatrixXd& y) const {
  return (y.colwise() - out_mean).array().colwise() / out_scale.array();
}

Eigen::MatrixXd Standardizer::from_net_outputs(const Eigen::MatrixXd& y) const {
  return (y.array().colwise() * out_scale.array()).matrix().colwise() + out_mean;
}

Eigen::VectorXd Surrogate::predict(const Eigen::VectorXd& input) const {
  if (input.size() != input_dim()) {
    throw InvalidInput("surrogate: input has length " + std::to_string(input.size()) +
                       ", model expects " + std::to_string(input_dim()));
  }
  const Eigen::MatrixXd x = input;
  return norm.from_net_outputs(forward(params, norm.to_net_inputs(x))).col(0);
}

Eigen::MatrixXd Surrogate::predict(const Eigen::MatrixXd& inputs) const {
  return norm.from_net_outputs(forward(params, norm.to_net_inputs(inputs)));
}

std::string parameter_block(const Surrogate& model) {
  std::ostringstream os;
  io::write_f64s(os, {model.params.flat().data(), static_cast<std::size_t>(model.params.flat().size())});
  return os.str();
}

std::string serialize_model(const Surrogate& model) {
  const auto& arch = model.params.arch();
  json h;
  h["format"] = "nudgenet-resnet";
  h["version"] = 1;
  h["widths"] = arch.widths;
  h["tau"] = arch.tau;
  h["eps"] = arch.eps;
  h["component"] = model.component;
  h["dataset_hash"] = model.dataset_hash;
  h["standardizer"] = {{"in_mean", to_vec(model.norm.in_mean)},
                       {"in_scale", to_vec(model.norm.in_scale)},
                       {"out_mean", to_vec(model.norm.out_mean)},
                       {"out_scale", to_vec(model.norm.out_scale)}};
  h["provenance"] = model.provenance;
  const std::string header = h.dump(2);
  std::ostringstream os;
  io::write_bytes(os, kMagic);
  io::write_u64(os, header.size());
  io::write_bytes(os, header);
  io::write_u64(os, static_cast<std::uint64_t>(model.params.flat().size()));
  io::write_bytes(os, parameter_block(model));
  return os.str();
}

void save_model(const std::filesystem::path& path, const Surrogate& model) {
  io::write_file(path, serialize_model(model));
}

Surrogate load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw FormatError("cannot open model " + path.string());
  }
  if (io::read_bytes(in, kMagic.size()) != kMagic) {
    throw FormatError("model: bad magic in " + path.string());
  }
  const auto len = io::read_u64(in);
  if (len > (1u << 26)) {
    throw FormatError("model: implausible header length");
  }
  Surrogate m;
  try {
    const json h = json::parse(io::read_bytes(in, len));
    ResNetArch arch;
    arch.widths = h.at("widths").get<std::vector<int>>();
    arch.tau = h.at("tau").get<double>();
    arch.eps = h.at("eps").get<double>();
    m.params = ResNetParams(arch);
    m.component = h.at("component").get<int>();
    m.dataset_hash = h.at("dataset_hash").get<std::string>();
    const auto& s = h.at("standardizer");
    m.norm = {from_vec(s.at("in_mean")), from_vec(s.at("in_scale")), from_vec(s.at("out_mean")),
              from_vec(s.at("out_scale"))};
    m.provenance = h.value("provenance", json::object());
  } catch (const json::exception& e) {
    throw FormatError(std::string("model: bad header: ") + e.what());
  }
  const auto count = io::read_u64(in);
  if (static_cast<Eigen::Index>(count) != m.params.flat().size()) {
    throw FormatError("model: parameter count does not match architecture");
  }
  io::read_f64s(in, {m.params.flat().data(), static_cast<std::size_t>(count)});
  return m;
}

Batch make_batch(const std::vector<TrainingSample>& samples) {
  Batch b;
  if (samples.empty()) {
    return b;
  }
  const auto n = static_cast<Eigen::Index>(samples.size());
  b.inputs.resize(samples.front().input.size(), n);
  b.targets.resize(samples.front().output.size(), n);
  for (Eigen::Index k = 0; k < n; ++k) {
    b.inputs.col(k) = samples[static_cast<std::size_t>(k)].input;
    b.targets.col(k) = samples[static_cast<std::size_t>(k)].output;
  }
  return b;
}

Batch make_batch(const Dataset& data, const std::vector<std::size_t>& rows) {
  Batch b;
  const auto n = static_cast<Eigen::Index>(rows.size());
  b.inputs.resize(data.input_dim(), n);
  b.targets.resize(data.output_dim(), n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto& s = data.samples[rows[static_cast<std::size_t>(k)]];
    b.inputs.col(k) = s.input;
    b.targets.col(k) = s.output;
  }
  return b;
}

}  // namespace nudgenet
