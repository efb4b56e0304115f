#include "nudgenet/config.hpp"

#include "nudgenet/io_util.hpp"

#include <charconv>
#include <set>
#include <sstream>

namespace nudgenet {

IniDocument IniDocument::parse(const std::string& text) {
  IniDocument doc;
  std::string section;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (const auto hash = line.find_first_of("#;"); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = io::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ConfigError("config line " + std::to_string(line_no) + ": unterminated section header");
      }
      section = std::string(io::trim(line.substr(1, line.size() - 2)));
      if (section.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty section name");
      doc.data_[section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key(io::trim(line.substr(0, eq)));
    const std::string value(io::trim(line.substr(eq + 1)));
    if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    if (doc.has(section, key)) {
      throw ConfigError("config line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    }
    doc.data_[section][key] = value;
  }
  return doc;
}

bool IniDocument::has(const std::string& section, const std::string& key) const {
  return find(section, key) != nullptr;
}

const std::string* IniDocument::find(const std::string& section, const std::string& key) const {
  const auto s = data_.find(section);
  if (s == data_.end()) return nullptr;
  const auto k = s->second.find(key);
  return k == s->second.end() ? nullptr : &k->second;
}

void IniDocument::set(const std::string& section, const std::string& key, const std::string& value) {
  data_[section][key] = value;
}

namespace {

// Reads typed values and remembers which keys were consumed.
class Reader {
 public:
  explicit Reader(const IniDocument& doc) : doc_(doc) {}

  template <typename T>
  void get(const std::string& section, const std::string& key, T& out) {
    used_.insert(section + "." + key);
    const std::string* v = doc_.find(section, key);
    if (!v) return;
    try {
      out = convert<T>(*v);
    } catch (const std::exception&) {
      throw ConfigError("config [" + section + "] " + key + ": cannot parse '" + *v + "'");
    }
  }

  [[nodiscard]] const std::string* raw(const std::string& section, const std::string& key) {
    used_.insert(section + "." + key);
    return doc_.find(section, key);
  }

  void reject_unknown() const {
    for (const auto& [section, keys] : doc_.sections()) {
      for (const auto& [key, value] : keys) {
        if (!used_.count(section + "." + key)) {
          throw ConfigError("config: unknown key '" + key + "' in section [" + section + "]");
        }
      }
    }
  }

 private:
  template <typename T>
  static T convert(const std::string& s) {
    if constexpr (std::is_same_v<T, double>) {
      return io::parse_double(s);
    } else if constexpr (std::is_same_v<T, bool>) {
      if (s == "true" || s == "1" || s == "yes") return true;
      if (s == "false" || s == "0" || s == "no") return false;
      throw std::invalid_argument("bool");
    } else if constexpr (std::is_same_v<T, std::string>) {
      return s;
    } else {
      T v{};
      const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc() || p != s.data() + s.size()) throw std::invalid_argument("int");
      return v;
    }
  }

  const IniDocument& doc_;
  std::set<std::string> used_;
};

std::string fmt(double v) { return io::format_double(v); }
std::string fmt(bool v) { return v ? "true" : "false"; }

}  // namespace

void PipelineConfig::validate() const {
  try {
    if (system.kind == SystemKind::lorenz96 && system.l96.dim < 4) {
      throw InvalidInput("system: Lorenz 96 needs dim >= 4");
    }
    ensemble.validate();
    integ.validate();
    nudging().validate();
    if (op.state_dim() != system.dim()) throw InvalidInput("observations: operator dimension differs from the system");
    if (windows < 1) throw InvalidInput("nudging: windows must be >= 1");
    if (static_cast<double>(windows) * delta > ensemble.horizon * (1.0 + 1e-12)) {
      throw InvalidInput("nudging: windows * delta exceeds the recorded horizon");
    }
    arch.make(system.dim() + op.size(), system.dim()).validate();
    if (arch.reduced && system.kind != SystemKind::lorenz96) {
      throw InvalidInput("arch: reduced networks need the Lorenz 96 system");
    }
    loss.validate();
    training.validate();
    if (evaluation.n_test < 1) throw InvalidInput("evaluation: n_test must be >= 1");
    if (!(evaluation.test_init_std > 0.0)) throw InvalidInput("evaluation: test_init_std must be positive");
    if (!(evaluation.k0 >= 0.0 && evaluation.horizon > evaluation.k0)) {
      throw InvalidInput("evaluation: need 0 <= k0 < horizon");
    }
  } catch (const InvalidInput& e) {
    throw ConfigError(e.what());
  }
}

NudgingConfig PipelineConfig::nudging() const {
  NudgingConfig n;
  n.mu = mu;
  n.innovation = innovation;
  n.delta = delta;
  n.op = op;
  return n;
}

void PipelineConfig::set_seed(std::uint64_t s) {
  seed = s;
  ensemble.seed = s;
  training.seed = s;
}

EnsembleSpec PipelineConfig::test_ensemble() const {
  EnsembleSpec t = ensemble;
  t.n_refs = evaluation.n_test;
  t.init_std = evaluation.test_init_std;
  t.horizon = evaluation.horizon;
  t.purpose = StreamPurpose::test_initial;
  return t;
}

std::string PipelineConfig::to_ini() const {
  std::ostringstream os;
  os << "seed = " << seed << "\n\n[system]\nname = " << system.name() << '\n';
  if (system.kind == SystemKind::lorenz63) {
    os << "sigma = " << fmt(system.l63.sigma) << "\nrho = " << fmt(system.l63.rho)
       << "\nbeta = " << fmt(system.l63.beta) << '\n';
  } else {
    os << "forcing = " << fmt(system.l96.forcing) << "\ndim = " << system.l96.dim << '\n';
  }
  os << "\n[ensemble]\nn_refs = " << ensemble.n_refs << "\ninit_mean = " << fmt(ensemble.init_mean)
     << "\ninit_std = " << fmt(ensemble.init_std) << "\nspin_up = " << fmt(ensemble.spin_up)
     << "\nhorizon = " << fmt(ensemble.horizon) << '\n';
  os << "\n[observations]\nindices = ";
  for (std::size_t i = 0; i < op.indices().size(); ++i) os << (i ? "," : "") << op.indices()[i];
  os << "\n\n[nudging]\nmu = " << fmt(mu) << "\ndelta = " << fmt(delta) << "\nwindows = " << windows
     << "\ninnovation = " << to_string(innovation) << '\n';
  os << "\n[integrator]\nrel_tol = " << fmt(integ.rel_tol) << "\nabs_tol = " << fmt(integ.abs_tol)
     << "\nmax_step = " << fmt(integ.max_step) << "\ndense_stride = " << fmt(integ.dense_output_stride)
     << "\nmax_steps = " << integ.max_steps << '\n';
  os << "\n[arch]\nhidden_layers = " << arch.hidden_layers << "\nwidth = " << arch.width
     << "\ntau = " << fmt(arch.tau) << "\neps = " << fmt(arch.eps) << "\nreduced = " << fmt(arch.reduced) << '\n';
  os << "\n[training]\nsplit_fraction = " << fmt(training.split_fraction) << "\npatience = " << training.patience
     << "\nmax_iters = " << training.max_iters << "\nlbfgs_memory = " << training.lbfgs_memory
     << "\nline_search = strong_wolfe\nstandardize = " << fmt(training.standardize)
     << "\npenalty_double_every = " << training.penalty_double_every
     << "\nmax_consecutive_failures = " << training.max_consecutive_failures
     << "\nlambda = " << fmt(loss.lambda) << "\ngamma = " << fmt(loss.gamma_penalty)
     << "\nbias_ordering = " << fmt(loss.bias_ordering) << '\n';
  os << "\n[evaluation]\nn_test = " << evaluation.n_test << "\ntest_init_std = " << fmt(evaluation.test_init_std)
     << "\nk0 = " << fmt(evaluation.k0) << "\nhorizon = " << fmt(evaluation.horizon)
     << "\nobserved_only = " << fmt(evaluation.observed_only) << '\n';
  return os.str();
}

std::string PipelineConfig::hash() const { return hash_bytes(to_ini()); }

PipelineConfig PipelineConfig::from_ini(const IniDocument& doc) {
  Reader r(doc);
  PipelineConfig c;
  r.get("", "seed", c.seed);

  std::string name = "lorenz63";
  r.get("system", "name", name);
  if (name == "lorenz63") {
    c = lorenz63(1);
    r.get("", "seed", c.seed);
  } else if (name == "lorenz96") {
    c = lorenz96(20);
    r.get("", "seed", c.seed);
  } else {
    throw ConfigError("config [system] name: expected lorenz63 or lorenz96, got '" + name + "'");
  }
  r.get("system", "sigma", c.system.l63.sigma);
  r.get("system", "rho", c.system.l63.rho);
  r.get("system", "beta", c.system.l63.beta);
  r.get("system", "forcing", c.system.l96.forcing);
  r.get("system", "dim", c.system.l96.dim);
  if (c.system.kind == SystemKind::lorenz96 && c.system.l96.dim < 4) {
    throw ConfigError("config [system] dim must be >= 4");
  }

  r.get("ensemble", "n_refs", c.ensemble.n_refs);
  r.get("ensemble", "init_mean", c.ensemble.init_mean);
  r.get("ensemble", "init_std", c.ensemble.init_std);
  r.get("ensemble", "spin_up", c.ensemble.spin_up);
  r.get("ensemble", "horizon", c.ensemble.horizon);

  const std::string* indices = r.raw("observations", "indices");
  const std::string* every = r.raw("observations", "every");
  const int dim = c.system.dim();
  try {
    if (indices && every) throw ConfigError("config [observations]: give either indices or every, not both");
    if (indices) {
      std::vector<int> idx;
      for (auto part : io::split(*indices, ',')) {
        const auto t = io::trim(part);
        int v = 0;
        const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
        if (ec != std::errc() || p != t.data() + t.size()) {
          throw ConfigError("config [observations] indices: cannot parse '" + std::string(t) + "'");
        }
        idx.push_back(v);
      }
      c.op = ObservationOperator(idx, dim);
    } else if (every) {
      int step = 0;
      const auto [p, ec] = std::from_chars(every->data(), every->data() + every->size(), step);
      if (ec != std::errc() || p != every->data() + every->size()) {
        throw ConfigError("config [observations] every: cannot parse '" + *every + "'");
      }
      c.op = ObservationOperator::multiples_of(step, dim);
    } else if (c.op.state_dim() != dim) {
      c.op = ObservationOperator({1}, dim);
    }
  } catch (const InvalidInput& e) {
    throw ConfigError(std::string("config [observations]: ") + e.what());
  }

  r.get("nudging", "mu", c.mu);
  r.get("nudging", "delta", c.delta);
  r.get("nudging", "windows", c.windows);
  if (const std::string* inn = r.raw("nudging", "innovation")) {
    try {
      c.innovation = innovation_from_string(*inn);
    } catch (const InvalidInput& e) {
      throw ConfigError(std::string("config [nudging] innovation: ") + e.what());
    }
  }
  c.ensemble.record_stride = c.delta;

  r.get("integrator", "rel_tol", c.integ.rel_tol);
  r.get("integrator", "abs_tol", c.integ.abs_tol);
  r.get("integrator", "max_step", c.integ.max_step);
  r.get("integrator", "dense_stride", c.integ.dense_output_stride);
  r.get("integrator", "max_steps", c.integ.max_steps);

  r.get("arch", "hidden_layers", c.arch.hidden_layers);
  r.get("arch", "width", c.arch.width);
  r.get("arch", "tau", c.arch.tau);
  r.get("arch", "eps", c.arch.eps);
  r.get("arch", "reduced", c.arch.reduced);

  r.get("training", "split_fraction", c.training.split_fraction);
  r.get("training", "patience", c.training.patience);
  r.get("training", "max_iters", c.training.max_iters);
  r.get("training", "lbfgs_memory", c.training.lbfgs_memory);
  std::string ls = "strong_wolfe";
  r.get("training", "line_search", ls);
  if (ls != "strong_wolfe") throw ConfigError("config [training] line_search: only strong_wolfe is supported");
  r.get("training", "standardize", c.training.standardize);
  r.get("training", "penalty_double_every", c.training.penalty_double_every);
  r.get("training", "max_consecutive_failures", c.training.max_consecutive_failures);
  r.get("training", "lambda", c.loss.lambda);
  r.get("training", "gamma", c.loss.gamma_penalty);
  r.get("training", "bias_ordering", c.loss.bias_ordering);

  r.get("evaluation", "n_test", c.evaluation.n_test);
  r.get("evaluation", "test_init_std", c.evaluation.test_init_std);
  r.get("evaluation", "k0", c.evaluation.k0);
  r.get("evaluation", "horizon", c.evaluation.horizon);
  r.get("evaluation", "observed_only", c.evaluation.observed_only);

  r.reject_unknown();
  c.set_seed(c.seed);
  c.validate();
  return c;
}

PipelineConfig PipelineConfig::from_text(const std::string& text) {
  return from_ini(IniDocument::parse(text));
}

PipelineConfig PipelineConfig::load(const std::filesystem::path& path) {
  std::string text;
  try {
    text = io::read_file(path);
  } catch (const std::exception& e) {
    throw ConfigError("cannot read config " + path.string() + ": " + e.what());
  }
  return from_text(text);
}

PipelineConfig PipelineConfig::lorenz63(int observed_component) {
  if (observed_component < 1 || observed_component > 3) {
    throw ConfigError("lorenz63 recipe: observed component must be 1, 2 or 3");
  }
  PipelineConfig c;
  c.system.kind = SystemKind::lorenz63;
  c.op = ObservationOperator({observed_component}, 3);
  c.mu = observed_component == 1 ? 30.0 : 10.0;
  c.delta = 0.1;
  c.windows = 15;
  c.ensemble.record_stride = c.delta;
  c.evaluation.horizon = 10.0;
  return c;
}

PipelineConfig PipelineConfig::lorenz96(int n_obs) {
  PipelineConfig c;
  c.system.kind = SystemKind::lorenz96;
  c.system.l96 = Lorenz96Params{};
  const int d = c.system.l96.dim;
  switch (n_obs) {
    case 20: c.op = ObservationOperator::multiples_of(2, d); break;
    case 13: c.op = ObservationOperator::multiples_of(3, d); break;
    case 4:
      c.op = ObservationOperator::multiples_of(10, d);
      c.arch.hidden_layers = 15;
      c.arch.width = 10;
      break;
    default: throw ConfigError("lorenz96 recipe: observation count must be 20, 13 or 4");
  }
  c.mu = 10.0;
  c.delta = 0.1;
  c.windows = 15;
  c.arch.reduced = true;
  // 40 networks per pattern; most stop by patience well before this.
  c.training.max_iters = 2000;
  c.ensemble.record_stride = c.delta;
  c.evaluation.horizon = 20.0;
  return c;
}

}  // namespace nudgenet
