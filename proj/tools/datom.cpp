// datom: synthesize data, train detector-atom decomposers, and export
// plot-ready decompositions. Every command is seeded and non-interactive;
// outputs land in the --out directory and nowhere else.

#include <CLI11.hpp>
#include <json.hpp>

#include "datom/dataset_io.hpp"
#include "datom/metrics.hpp"
#include "datom/model.hpp"
#include "datom/synth.hpp"
#include "datom/trainer.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace datom;

namespace {

constexpr const char* kToolVersion = "0.1.0";

std::ofstream open_out(const fs::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write: " + path.string());
  return os;
}

// Traces are stored at float32 precision, like the dataset files; %.9g
// round-trips that exactly.
void put_trace(std::ostream& os, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(static_cast<float>(v)));
  os << buf;
}

void put_full(std::ostream& os, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  os << buf;
}

json read_json(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open: " + path);
  try {
    return json::parse(is, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError("spec: " + std::string(e.what()));
  }
}

// A waveform is either a raw array of samples or a named shape:
//   {"type": "gabor",    "length": L, "cycles": c, "width"?, "phase"?, "center"?}
//   {"type": "gaussian", "length": L, "center"?, "width"?}
//   {"type": "biphasic", "length": L, "center"?, "width"?}
Signal parse_waveform(const json& j, const std::string& what) {
  if (j.is_array()) {
    Signal s(static_cast<Eigen::Index>(j.size()));
    Eigen::Index i = 0;
    for (const auto& v : j) {
      if (!v.is_number()) throw ConfigError("spec: " + what + ": non-numeric sample");
      s(i++) = v.get<double>();
    }
    if (s.size() == 0) throw ConfigError("spec: " + what + ": empty waveform");
    return s;
  }
  if (!j.is_object()) throw ConfigError("spec: " + what + ": expected array or shape object");
  const std::string type = j.at("type").get<std::string>();
  const int length = j.at("length").get<int>();
  if (type == "gabor")
    return gabor_atom(length, j.at("cycles").get<double>(), j.value("width", 0.35), j.value("phase", 0.0),
                      j.value("center", 0.5));
  if (type == "gaussian") return gaussian_bump(length, j.value("center", 0.5), j.value("width", 0.15));
  if (type == "biphasic") return biphasic_pulse(length, j.value("center", 0.5), j.value("width", 0.15));
  throw ConfigError("spec: " + what + ": unknown waveform type '" + type + "'");
}

std::pair<double, double> parse_range(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 2) throw ConfigError("spec: " + what + ": expected [lo, hi]");
  return {j[0].get<double>(), j[1].get<double>()};
}

void fill_basic_spec(const json& j, SynthSpec& s) {
  s.length = j.at("length").get<int>();
  for (std::size_t i = 0; i < j.at("atoms").size(); ++i)
    s.atoms.push_back(parse_waveform(j["atoms"][i], "atoms[" + std::to_string(i) + "]"));
  s.activation_density = j.at("activation_density").get<double>();
  if (j.contains("amp")) std::tie(s.amp_lo, s.amp_hi) = parse_range(j["amp"], "amp");
  s.noise_sigma = j.value("noise_sigma", 0.0);
  s.noise_relative = j.value("noise_relative", false);
}

// ---- synth ---------------------------------------------------------------

struct SynthArgs {
  std::string spec_path, out;
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool quiet = false;
};

Dataset clean_sibling(const Dataset& like, const std::vector<Signal>& clean) {
  Dataset t;
  for (std::size_t i = 0; i < clean.size(); ++i)
    t.samples.push_back({clean[i], like.samples[i].label});
  return t;
}

void cmd_synth(const SynthArgs& a) {
  const json spec = read_json(a.spec_path);
  std::string kind;
  std::uint64_t seed = 0;
  Dataset data;
  std::vector<std::pair<std::string, Dataset>> siblings;
  std::vector<std::vector<double>> gains;  // erp only
  int count = 0;

  try {
    kind = spec.at("kind").get<std::string>();
    seed = a.seed_set ? a.seed : spec.value("seed", std::uint64_t{0});

    if (kind == "basic") {
      SynthSpec s;
      fill_basic_spec(spec, s);
      s.seed = seed;
      count = spec.at("count").get<int>();
      BasicTruth truth;
      data = gen_basic(s, count, &truth);
      siblings.emplace_back("truth_clean", clean_sibling(data, truth.clean));
    } else if (kind == "noise") {
      NoiseMixSpec s;
      fill_basic_spec(spec.at("signal"), s.signal);
      s.signal.seed = seed;
      s.artifact = parse_waveform(spec.at("artifact"), "artifact");
      s.event_rate = spec.at("event_rate").get<double>();
      if (spec.contains("artifact_amp"))
        std::tie(s.artifact_lo, s.artifact_hi) = parse_range(spec["artifact_amp"], "artifact_amp");
      count = spec.at("count").get<int>();
      NoiseTruth truth;
      data = gen_noise_mixture(s, count, &truth);
      siblings.emplace_back("truth_s", clean_sibling(data, truth.s));
      siblings.emplace_back("truth_n", clean_sibling(data, truth.n));
    } else if (kind == "ssvep") {
      SSVEPSynthSpec s;
      s.length = spec.at("length").get<int>();
      s.sampling_rate = spec.at("sampling_rate").get<double>();
      s.phase = spec.value("phase", 0.0);
      s.flash_response = parse_waveform(spec.at("flash_response"), "flash_response");
      if (spec.contains("gain")) std::tie(s.gain_lo, s.gain_hi) = parse_range(spec["gain"], "gain");
      s.noise_sigma = spec.value("noise_sigma", 0.0);
      s.noise_relative = spec.value("noise_relative", false);
      s.seed = seed;
      std::vector<double> freqs = spec.at("frequencies").get<std::vector<double>>();
      count = spec.at("per_class").get<int>();
      SSVEPTruth truth;
      data = gen_ssvep(s, freqs, count, &truth);
      siblings.emplace_back("truth_clean", clean_sibling(data, truth.clean));
    } else if (kind == "erp") {
      ERPSynthSpec s;
      for (std::size_t i = 0; i < spec.at("components").size(); ++i)
        s.components.push_back(parse_waveform(spec["components"][i], "components[" + std::to_string(i) + "]"));
      for (std::size_t c = 0; c < spec.at("gain_ranges").size(); ++c) {
        std::vector<std::pair<double, double>> row;
        for (std::size_t p = 0; p < spec["gain_ranges"][c].size(); ++p)
          row.push_back(parse_range(spec["gain_ranges"][c][p],
                                    "gain_ranges[" + std::to_string(c) + "][" + std::to_string(p) + "]"));
        s.gain_ranges.push_back(std::move(row));
      }
      s.noise_sigma = spec.value("noise_sigma", 0.0);
      s.noise_relative = spec.value("noise_relative", false);
      s.seed = seed;
      count = spec.at("per_class").get<int>();
      ERPTruth truth;
      data = gen_erp(s, count, &truth);
      siblings.emplace_back("truth_clean", clean_sibling(data, truth.clean));
      gains = truth.gains;
    } else {
      throw ConfigError("spec: unknown kind '" + kind + "'");
    }
  } catch (const json::exception& e) {
    throw ConfigError("spec: " + std::string(e.what()));
  }

  // Everything validated and generated; only now touch the disk.
  const bool binary = spec.value("format", std::string("text")) == "binary";
  const std::string ext = binary ? ".bin" : ".csv";
  fs::create_directories(a.out);
  const fs::path out(a.out);

  save_dataset((out / ("data" + ext)).string(), data);
  json files;
  files["data"] = "data" + ext;
  for (const auto& [name, ds] : siblings) {
    save_dataset((out / (name + ext)).string(), ds);
    files[name] = name + ext;
  }
  if (!gains.empty()) {
    auto os = open_out(out / "gains.csv");
    os << "sample";
    for (std::size_t p = 0; p < gains[0].size(); ++p) os << ",g_" << p + 1;
    os << "\n";
    for (std::size_t i = 0; i < gains.size(); ++i) {
      os << i;
      for (double g : gains[i]) {
        os << ",";
        put_full(os, g);
      }
      os << "\n";
    }
    files["gains"] = "gains.csv";
  }

  json manifest;
  manifest["command"] = "synth";
  manifest["kind"] = kind;
  manifest["seed"] = seed;
  manifest["count"] = count;
  manifest["samples"] = data.size();
  manifest["length"] = data.length();
  manifest["spec"] = spec;
  manifest["files"] = files;
  manifest["tool_version"] = kToolVersion;
  open_out(out / "manifest.json") << manifest.dump(2) << "\n";

  if (!a.quiet)
    std::cout << "wrote " << data.size() << " samples (T=" << data.length() << ") to " << a.out << "\n";
}

// ---- train ----------------------------------------------------------------

struct TrainArgs {
  std::string arch, data, config, out;
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool quiet = false;
};

void cmd_train(const TrainArgs& a) {
  RunConfig rc;
  if (!a.config.empty()) rc = load_run_config(a.config);
  if (a.seed_set) rc.train.seed = a.seed;

  const Arch arch = arch_from_name(a.arch);
  Dataset ds = load_dataset(a.data);
  ds.validate();

  Rng rng(rc.train.seed);
  ModelVariant model = build_model(arch, rc.model, ds.length(), rng);
  if (!a.quiet)
    std::cout << "training " << a.arch << " on " << ds.size() << " samples (T=" << ds.length() << ") for "
              << rc.train.epochs << " epochs\n";

  TrainHistory history = train(model, ds, rc.train);

  fs::create_directories(a.out);
  const fs::path out(a.out);
  save_model((out / "model.bin").string(), model);
  {
    auto os = open_out(out / "history.csv");
    history.write_csv(os);
  }
  std::ostringstream cfg_snapshot;
  write_run_config(cfg_snapshot, rc);
  open_out(out / "config.cfg") << cfg_snapshot.str();

  json manifest;
  manifest["command"] = "train";
  manifest["arch"] = a.arch;
  manifest["seed"] = rc.train.seed;
  manifest["dataset"] = a.data;
  manifest["out_dir"] = a.out;
  manifest["files"] = {{"model", "model.bin"}, {"history", "history.csv"}, {"config", "config.cfg"}};
  manifest["config"] = cfg_snapshot.str();
  manifest["epochs"] = rc.train.epochs;
  manifest["tool_version"] = kToolVersion;
  open_out(out / "manifest.json") << manifest.dump(2) << "\n";

  if (!a.quiet && !history.records.empty())
    std::cout << "total loss " << history.records.front().total << " -> " << history.records.back().total
              << "\n";
}

// ---- decompose / eval ------------------------------------------------------

struct ModelDataArgs {
  std::string model, data, out;
  bool quiet = false;
  bool psd = false;
  double fs = 1.0;
};

std::string sample_name(const char* stem, int i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s_%04d.csv", stem, i);
  return buf;
}

void cmd_decompose(const ModelDataArgs& a) {
  ModelVariant model = load_model(a.model);
  Dataset ds = load_dataset(a.data);
  ds.validate();

  fs::create_directories(a.out);
  const fs::path out(a.out);
  auto metrics = open_out(out / "metrics.csv");
  metrics << "sample,rmse,mae,nmae\n";

  std::ofstream weights;
  const bool erp = arch_of(model) == Arch::erp;

  for (int i = 0; i < ds.size(); ++i) {
    const Signal& x = ds.samples[static_cast<std::size_t>(i)].signal;
    Decomposition d = decompose(model, x);

    auto os = open_out(out / sample_name("sample", i));
    os << "x,reconstruction";
    if (d.s_hat) os << ",s_hat,n_hat";
    for (const auto& name : d.names) os << "," << name;
    os << "\n";
    for (int t = 0; t < ds.length(); ++t) {
      put_trace(os, x(t));
      os << ",";
      put_trace(os, d.reconstruction(t));
      if (d.s_hat) {
        os << ",";
        put_trace(os, (*d.s_hat)(t));
        os << ",";
        put_trace(os, (*d.n_hat)(t));
      }
      for (const auto& c : d.components) {
        os << ",";
        put_trace(os, c(t));
      }
      os << "\n";
    }

    auto r = evaluate_sample(x, d.reconstruction, {});
    metrics << i << ",";
    put_full(metrics, r.rmse);
    metrics << ",";
    put_full(metrics, r.mae);
    metrics << ",";
    put_full(metrics, r.nmae);
    metrics << "\n";

    if (erp) {
      if (!weights.is_open()) {
        weights = open_out(out / "weights.csv");
        weights << "sample";
        for (std::size_t p = 0; p < d.weights.size(); ++p) weights << ",w_" << p + 1;
        weights << "\n";
      }
      weights << i;
      for (double w : d.weights) {
        weights << ",";
        put_full(weights, w);
      }
      weights << "\n";
    }
  }
  if (!a.quiet) std::cout << "decomposed " << ds.size() << " samples into " << a.out << "\n";
}

void cmd_eval(const ModelDataArgs& a) {
  ModelVariant model = load_model(a.model);
  Dataset ds = load_dataset(a.data);
  ds.validate();

  fs::create_directories(a.out);
  const fs::path out(a.out);

  std::vector<std::string> names;
  double sum_rmse = 0, sum_mae = 0, sum_nmae = 0;
  int nmae_n = 0;

  auto report = open_out(out / "report.csv");
  for (int i = 0; i < ds.size(); ++i) {
    const Signal& x = ds.samples[static_cast<std::size_t>(i)].signal;
    Decomposition d = decompose(model, x);
    if (i == 0) {
      names = d.names;
      report << "sample,label,rmse,mae,nmae";
      for (const auto& n : names) report << ",power_" << n;
      report << "\n";
    }
    auto r = evaluate_sample(x, d.reconstruction, d.components);
    report << i << "," << ds.samples[static_cast<std::size_t>(i)].label << ",";
    put_full(report, r.rmse);
    report << ",";
    put_full(report, r.mae);
    report << ",";
    put_full(report, r.nmae);
    for (const auto& c : d.components) {
      report << ",";
      put_full(report, c.square().mean());
    }
    report << "\n";

    sum_rmse += r.rmse;
    sum_mae += r.mae;
    if (std::isfinite(r.nmae)) {
      sum_nmae += r.nmae;
      ++nmae_n;
    }

    if (a.psd) {
      auto p = periodogram(x, a.fs);
      auto os = open_out(out / sample_name("psd", i));
      os << "frequency,power\n";
      for (Eigen::Index k = 0; k < p.frequency.size(); ++k) {
        put_full(os, p.frequency(k));
        os << ",";
        put_full(os, p.power(k));
        os << "\n";
      }
    }
  }

  auto summary = open_out(out / "summary.csv");
  summary << "metric,value\n";
  summary << "mean_rmse,";
  put_full(summary, sum_rmse / ds.size());
  summary << "\nmean_mae,";
  put_full(summary, sum_mae / ds.size());
  summary << "\nmean_nmae,";
  put_full(summary, nmae_n ? sum_nmae / nmae_n : std::numeric_limits<double>::quiet_NaN());
  summary << "\n";

  if (!a.quiet) std::cout << "evaluated " << ds.size() << " samples into " << a.out << "\n";
}

// ---- inspect-atoms ----------------------------------------------------------

struct InspectArgs {
  std::string model, out;
  bool quiet = false;
};

std::string file_safe(std::string id) {
  for (char& c : id)
    if (c == '.' || c == '/' || c == '\\') c = '_';
  return id;
}

void cmd_inspect_atoms(const InspectArgs& a) {
  ModelVariant model = load_model(a.model);

  std::vector<const Parameter*> atoms;
  std::visit(
      [&](auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, SSVEPDecomposer>) {
          atoms.push_back(&m.atom);
        } else if constexpr (std::is_same_v<T, NoiseDecomposer>) {
          for (const auto& p : m.signal_pairs) atoms.push_back(&p.atom);
          for (const auto& p : m.noise_pairs) atoms.push_back(&p.atom);
        } else {
          for (const auto& p : m.pairs) atoms.push_back(&p.atom);
        }
      },
      model);

  fs::create_directories(a.out);
  const fs::path out(a.out);
  auto norms = open_out(out / "norms.csv");
  norms << "atom,l2_norm\n";
  for (const auto* atom : atoms) {
    auto os = open_out(out / (file_safe(atom->id) + ".csv"));
    os << "index,value\n";
    for (Eigen::Index i = 0; i < atom->value.rows(); ++i) {
      os << i << ",";
      put_trace(os, atom->value(i, 0));
      os << "\n";
    }
    norms << atom->id << ",";
    put_full(norms, atom->value.matrix().norm());
    norms << "\n";
  }
  if (!a.quiet) std::cout << "wrote " << atoms.size() << " atoms to " << a.out << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"detector-atom network toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", kToolVersion);

  std::uint64_t seed = 0;
  bool quiet = false;
  auto* seed_opt = app.add_option("--seed", seed, "override the seed from specs/configs");
  app.add_flag("--quiet", quiet, "suppress progress output");

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset from a JSON spec");
  synth->add_option("--spec", synth_args.spec_path, "JSON spec file")->required();
  synth->add_option("--out", synth_args.out, "output directory")->required();

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "train a decomposer on a dataset");
  train_cmd->add_option("--arch", train_args.arch, "basic|noise|ssvep|erp")
      ->required()
      ->check(CLI::IsMember({"basic", "noise", "ssvep", "erp"}));
  train_cmd->add_option("--data", train_args.data, "dataset file")->required();
  train_cmd->add_option("--config", train_args.config, "run config file (defaults apply if omitted)");
  train_cmd->add_option("--out", train_args.out, "output directory")->required();

  ModelDataArgs dec_args;
  auto* dec = app.add_subcommand("decompose", "write per-sample component traces and metrics");
  dec->add_option("--model", dec_args.model, "model file")->required();
  dec->add_option("--data", dec_args.data, "dataset file")->required();
  dec->add_option("--out", dec_args.out, "output directory")->required();

  ModelDataArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "report per-sample errors and component powers");
  eval_cmd->add_option("--model", eval_args.model, "model file")->required();
  eval_cmd->add_option("--data", eval_args.data, "dataset file")->required();
  eval_cmd->add_option("--out", eval_args.out, "output directory")->required();
  eval_cmd->add_flag("--psd", eval_args.psd, "also write per-sample periodograms");
  eval_cmd->add_option("--fs", eval_args.fs, "sampling rate for --psd (default 1.0)");

  InspectArgs ins_args;
  auto* ins = app.add_subcommand("inspect-atoms", "dump atom traces and their norms");
  ins->add_option("--model", ins_args.model, "model file")->required();
  ins->add_option("--out", ins_args.out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*synth) {
      synth_args.seed = seed;
      synth_args.seed_set = seed_opt->count() > 0;
      synth_args.quiet = quiet;
      cmd_synth(synth_args);
    } else if (*train_cmd) {
      train_args.seed = seed;
      train_args.seed_set = seed_opt->count() > 0;
      train_args.quiet = quiet;
      cmd_train(train_args);
    } else if (*dec) {
      dec_args.quiet = quiet;
      cmd_decompose(dec_args);
    } else if (*eval_cmd) {
      eval_args.quiet = quiet;
      cmd_eval(eval_args);
    } else if (*ins) {
      ins_args.quiet = quiet;
      cmd_inspect_atoms(ins_args);
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const CompatibilityError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 5;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
