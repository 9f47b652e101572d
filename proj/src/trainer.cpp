#include "datom/trainer.hpp"

#include "datom/adam.hpp"
#include "datom/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace datom {

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (lr < 0.0) throw ConfigError("train: lr must be >= 0");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
    throw ConfigError("train: betas must be in [0, 1)");
  if (weight_decay < 0.0) throw ConfigError("train: weight_decay must be >= 0");
  for (std::size_t i = 0; i < alpha_sparsity.size(); ++i) {
    if (alpha_sparsity[i].value < 0.0) throw ConfigError("train: alpha_sparsity values must be >= 0");
    if (i > 0 && alpha_sparsity[i].start_epoch <= alpha_sparsity[i - 1].start_epoch)
      throw ConfigError("train: alpha_sparsity entries must have increasing start epochs");
  }
  if (reassign_check_every < 0) throw ConfigError("train: reassign_check_every must be >= 0");
  if (reassign_threshold < 0.0) throw ConfigError("train: reassign_threshold must be >= 0");
  if (resample_every < 0) throw ConfigError("train: resample_every must be >= 0");
  if (resample_every > 0 && resample_count < 1)
    throw ConfigError("train: resample_count must be >= 1 when resampling");
}

double alpha_at(const TrainConfig& cfg, int epoch) {
  double a = 0.0;
  for (const auto& e : cfg.alpha_sparsity) {
    if (e.start_epoch > epoch) break;
    a = e.value;
  }
  return a;
}

NoisePhase phase_at(const TrainConfig& cfg, int epoch) {
  if (cfg.noise_phase_switch_epoch >= 0 && epoch >= cfg.noise_phase_switch_epoch)
    return NoisePhase::refined;
  return NoisePhase::initial;
}

void TrainHistory::write_csv(std::ostream& os) const {
  os << "epoch,total,fidelity,sparsity,reassigns\n";
  char buf[96];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof(buf), "%d,%.12g,%.12g,%.12g,%d\n", r.epoch, r.total, r.fidelity, r.sparsity,
                  r.reassigns);
    os << buf;
  }
}

namespace {

// One sample's loss terms plus the per-pair output energies used to pick
// reassignment donors.
struct SampleLoss {
  Expr total, fidelity, sparsity;
};

double bank_energy(Tape& t, const std::vector<Expr>& components, std::vector<double>& acc) {
  double sum = 0.0;
  for (std::size_t n = 0; n < components.size(); ++n) {
    const double e = t.value(components[n]).square().sum();
    acc[n] += e;
    sum += e;
  }
  return sum;
}

void check_labels(const Dataset& data, int n_classes, const char* what) {
  for (int i = 0; i < data.size(); ++i) {
    const int y = data.samples[static_cast<std::size_t>(i)].label;
    if (y < 1 || y > n_classes)
      throw CompatibilityError(std::string(what) + ": sample " + std::to_string(i) + " label " +
                               std::to_string(y) + " outside 1.." + std::to_string(n_classes));
  }
}

std::string param_norms(std::vector<Parameter*> params) {
  std::ostringstream ss;
  std::size_t shown = 0;
  for (auto* p : params) {
    if (shown == 12) {
      ss << " ...";
      break;
    }
    ss << (shown ? " " : "") << p->id << "=" << p->value.matrix().norm();
    ++shown;
  }
  return ss.str();
}

}  // namespace

TrainHistory train(ModelVariant& model, const Dataset& data, const TrainConfig& cfg) {
  cfg.validate();
  data.validate();
  const Arch arch = arch_of(model);
  const int t_len = data.length();

  if (arch == Arch::noise && !data.has_masks())
    throw CompatibilityError("train: noise variant needs a masked dataset");
  if (arch == Arch::ssvep) check_labels(data, std::get<SSVEPDecomposer>(model).n_classes(), "train/ssvep");
  if (arch == Arch::erp) {
    auto& m = std::get<ERPDecomposer>(model);
    check_labels(data, m.num_classes, "train/erp");
    if (m.input_length() != t_len)
      throw CompatibilityError("train/erp: atoms span " + std::to_string(m.input_length()) +
                               " samples but dataset has T=" + std::to_string(t_len));
  }

  auto params = parameters(model);
  Adam adam(params, AdamConfig{cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps, cfg.weight_decay});
  Rng rng(cfg.seed);

  auto banks = reassignable_banks(model);
  // Component energies of the most recent batch, one slot per bank pair.
  std::vector<std::vector<double>> last_energy(banks.size());
  for (std::size_t b = 0; b < banks.size(); ++b) last_energy[b].assign(banks[b]->size(), 0.0);

  std::vector<int> pool(static_cast<std::size_t>(data.size()));
  std::iota(pool.begin(), pool.end(), 0);
  std::vector<int> order;

  Tape tape;
  TrainHistory history;
  history.records.reserve(static_cast<std::size_t>(cfg.epochs));

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double alpha = alpha_at(cfg, epoch);
    const NoisePhase phase = phase_at(cfg, epoch);

    int reassigns = 0;
    if (cfg.reassign_check_every > 0 && epoch > 0 && epoch % cfg.reassign_check_every == 0) {
      for (std::size_t b = 0; b < banks.size(); ++b) {
        auto& bank = *banks[b];
        const auto dead = detect_dead_atoms(bank, cfg.reassign_threshold);
        if (dead.empty()) continue;
        std::vector<bool> is_dead(bank.size(), false);
        for (int k : dead) is_dead[static_cast<std::size_t>(k)] = true;
        for (int k : dead) {
          int donor = -1;
          double best = -1.0;
          for (std::size_t n = 0; n < bank.size(); ++n)
            if (!is_dead[n] && static_cast<int>(n) != k && last_energy[b][n] > best) {
              best = last_energy[b][n];
              donor = static_cast<int>(n);
            }
          if (donor < 0) break;  // nothing alive to donate
          atom_reassign(bank, k, donor);
          // Both pairs hold fresh values now; stale Adam momentum for them
          // would tear the split apart on the next step.
          auto& revived = bank[static_cast<std::size_t>(k)];
          std::vector<Parameter*> touched;
          collect_parameters(revived.detector, touched);
          touched.push_back(&revived.atom);
          touched.push_back(&bank[static_cast<std::size_t>(donor)].atom);
          for (Parameter* p : touched) adam.reset_state(p);
          // The donor's output is now split between the two pairs.
          last_energy[b][static_cast<std::size_t>(k)] = 0.5 * best;
          last_energy[b][static_cast<std::size_t>(donor)] = 0.5 * best;
          is_dead[static_cast<std::size_t>(k)] = false;
          ++reassigns;
        }
      }
    }

    if (cfg.resample_every > 0 && epoch % cfg.resample_every == 0) {
      const int want = std::min(cfg.resample_count, data.size());
      std::vector<int> all(static_cast<std::size_t>(data.size()));
      std::iota(all.begin(), all.end(), 0);
      rng.shuffle(all);
      pool.assign(all.begin(), all.begin() + want);
    }

    order = pool;
    rng.shuffle(order);

    double ep_total = 0.0, ep_fid = 0.0, ep_sp = 0.0;
    const int n_epoch = static_cast<int>(order.size());
    for (int start = 0; start < n_epoch; start += cfg.batch_size) {
      const int bs = std::min(cfg.batch_size, n_epoch - start);
      adam.zero_grad();
      for (std::size_t b = 0; b < banks.size(); ++b)
        std::fill(last_energy[b].begin(), last_energy[b].end(), 0.0);

      double batch_total = 0.0;
      for (int bi = 0; bi < bs; ++bi) {
        const auto& sample = data.samples[static_cast<std::size_t>(order[static_cast<std::size_t>(start + bi)])];
        const NoiseMask* mask =
            data.has_masks() ? &data.masks[static_cast<std::size_t>(order[static_cast<std::size_t>(start + bi)])] : nullptr;

        tape.reset();
        Expr x = tape.input_signal(sample.signal);
        SampleLoss loss{};

        switch (arch) {
          case Arch::basic: {
            auto& m = std::get<BasicDecomposer>(model);
            auto f = basic_forward(tape, m, x, true);
            loss.fidelity = fidelity_loss(x, f.reconstruction);
            loss.sparsity = sparsity_loss(f.activations, cfg.sparsity_normalize);
            loss.total = loss.fidelity + alpha * loss.sparsity;
            bank_energy(tape, f.components, last_energy[0]);
            break;
          }
          case Arch::noise: {
            auto& m = std::get<NoiseDecomposer>(model);
            // Each estimator trains on its own loss: the other bank's output
            // enters detached, so no gradient crosses over.
            auto f = noise_forward(tape, m, x, true, /*cross_detach=*/true);
            Expr n_det = detach(f.n_hat);
            Expr s_det = detach(f.s_hat);
            Expr loss_s = noise_loss_S(x, f.s_hat, n_det);
            Expr loss_n = noise_loss_N(x, f.n_hat, *mask, &s_det, phase);
            std::vector<Expr> zs = f.signal.activations;
            zs.insert(zs.end(), f.noise.activations.begin(), f.noise.activations.end());
            loss.fidelity = loss_s;
            loss.sparsity = sparsity_loss(zs, cfg.sparsity_normalize);
            loss.total = loss_s + loss_n + alpha * loss.sparsity;
            bank_energy(tape, f.signal.components, last_energy[0]);
            bank_energy(tape, f.noise.components, last_energy[1]);
            break;
          }
          case Arch::ssvep: {
            auto& m = std::get<SSVEPDecomposer>(model);
            auto f = ssvep_forward(tape, m, x, true);
            loss.fidelity = fidelity_loss(x, f.reconstruction);
            Expr sv = ssvep_loss(x, f.components, sample.label);
            loss.sparsity = sparsity_loss(f.activations, cfg.sparsity_normalize);
            loss.total = sv + alpha * loss.sparsity;
            break;
          }
          case Arch::erp: {
            auto& m = std::get<ERPDecomposer>(model);
            auto f = erp_forward(tape, m, x, true);
            Expr total{};
            Expr match{};
            for (int c = 1; c <= m.num_classes; ++c) {
              Expr recon_c{};
              bool any = false;
              for (std::size_t p = 0; p < f.components.size(); ++p)
                if (m.pair_class[p] == c) {
                  recon_c = any ? recon_c + f.components[p] : f.components[p];
                  any = true;
                }
              if (!any) continue;
              Expr lc = supervised_loss(x, sample.label, c, recon_c);
              total = total.tape ? total + lc : lc;
              if (c == sample.label) match = lc;
            }
            loss.fidelity = match;
            loss.sparsity = sparsity_loss(f.weights, cfg.sparsity_normalize);
            loss.total = total + alpha * loss.sparsity;
            bank_energy(tape, f.components, last_energy[0]);
            break;
          }
        }

        tape.backward(loss.total, 1.0 / static_cast<double>(bs));
        const double lt = tape.scalar_value(loss.total);
        batch_total += lt;
        ep_total += lt;
        ep_fid += loss.fidelity.tape ? tape.scalar_value(loss.fidelity) : 0.0;
        ep_sp += tape.scalar_value(loss.sparsity);
      }

      if (!std::isfinite(batch_total))
        throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) + " batch " +
                           std::to_string(start / cfg.batch_size) + "; parameter norms: " +
                           param_norms(params));
      adam.step();
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.total = ep_total / n_epoch;
    rec.fidelity = ep_fid / n_epoch;
    rec.sparsity = ep_sp / n_epoch;
    rec.reassigns = reassigns;
    history.records.push_back(rec);
  }
  return history;
}

// ---- run configuration files -------------------------------------------

void ModelConfig::validate() const {
  if (n_pairs < 1) throw ConfigError("config: n_pairs must be >= 1");
  if (n_signal_pairs < 1 || n_noise_pairs < 1) throw ConfigError("config: bank sizes must be >= 1");
  if (atom_length < 1) throw ConfigError("config: atom_length must be >= 1");
  if (detector_depth < 1) throw ConfigError("config: detector_depth must be >= 1");
  if (detector_kernel < 1) throw ConfigError("config: detector_kernel must be >= 1");
  if (detector_channels < 1) throw ConfigError("config: detector_channels must be >= 1");
  if (n_classes < 1) throw ConfigError("config: n_classes must be >= 1");
}

namespace {

std::vector<ScheduleEntry> parse_schedule(const std::string& text) {
  std::vector<ScheduleEntry> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw ConfigError("config: schedule entries are epoch:value, got " + item);
    ScheduleEntry e;
    try {
      e.start_epoch = std::stoi(item.substr(0, colon));
      e.value = std::stod(item.substr(colon + 1));
    } catch (const std::exception&) {
      throw ConfigError("config: bad schedule entry: " + item);
    }
    out.push_back(e);
  }
  return out;
}

std::string schedule_text(const std::vector<ScheduleEntry>& sched) {
  std::string out;
  char buf[64];
  for (const auto& e : sched) {
    std::snprintf(buf, sizeof(buf), "%s%d:%.12g", out.empty() ? "" : ",", e.start_epoch, e.value);
    out += buf;
  }
  return out;
}

}  // namespace

RunConfig parse_run_config(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != "datom-config v1")
    throw ConfigError("config: first line must be 'datom-config v1'");

  RunConfig cfg;
  int line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto strip = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      if (b == std::string::npos) return std::string();
      const auto e = s.find_last_not_of(" \t\r");
      return s.substr(b, e - b + 1);
    };
    if (strip(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = strip(line.substr(0, eq));
    const std::string value = strip(line.substr(eq + 1));

    try {
      auto& t = cfg.train;
      auto& m = cfg.model;
      if (key == "epochs") t.epochs = std::stoi(value);
      else if (key == "batch_size") t.batch_size = std::stoi(value);
      else if (key == "lr") t.lr = std::stod(value);
      else if (key == "beta1") t.beta1 = std::stod(value);
      else if (key == "beta2") t.beta2 = std::stod(value);
      else if (key == "weight_decay") t.weight_decay = std::stod(value);
      else if (key == "alpha_sparsity") t.alpha_sparsity = parse_schedule(value);
      else if (key == "sparsity_normalize") t.sparsity_normalize = std::stoi(value) != 0;
      else if (key == "noise_phase_switch_epoch") t.noise_phase_switch_epoch = std::stoi(value);
      else if (key == "reassign_check_every") t.reassign_check_every = std::stoi(value);
      else if (key == "reassign_threshold") t.reassign_threshold = std::stod(value);
      else if (key == "resample_every") t.resample_every = std::stoi(value);
      else if (key == "resample_count") t.resample_count = std::stoi(value);
      else if (key == "seed") t.seed = std::stoull(value);
      else if (key == "n_pairs") m.n_pairs = std::stoi(value);
      else if (key == "n_signal_pairs") m.n_signal_pairs = std::stoi(value);
      else if (key == "n_noise_pairs") m.n_noise_pairs = std::stoi(value);
      else if (key == "atom_length") m.atom_length = std::stoi(value);
      else if (key == "detector_depth") m.detector_depth = std::stoi(value);
      else if (key == "detector_kernel") m.detector_kernel = std::stoi(value);
      else if (key == "detector_channels") m.detector_channels = std::stoi(value);
      else if (key == "n_classes") m.n_classes = std::stoi(value);
      else throw ConfigError("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception&) {
      throw ConfigError("config line " + std::to_string(line_no) + ": bad value for '" + key + "'");
    }
  }
  cfg.train.validate();
  cfg.model.validate();
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("config: cannot open: " + path);
  return parse_run_config(is);
}

void write_run_config(std::ostream& os, const RunConfig& cfg) {
  const auto& t = cfg.train;
  const auto& m = cfg.model;
  os << "datom-config v1\n";
  char buf[128];
  os << "epochs = " << t.epochs << "\n";
  os << "batch_size = " << t.batch_size << "\n";
  std::snprintf(buf, sizeof(buf), "lr = %.12g\n", t.lr);
  os << buf;
  std::snprintf(buf, sizeof(buf), "beta1 = %.12g\n", t.beta1);
  os << buf;
  std::snprintf(buf, sizeof(buf), "beta2 = %.12g\n", t.beta2);
  os << buf;
  std::snprintf(buf, sizeof(buf), "weight_decay = %.12g\n", t.weight_decay);
  os << buf;
  if (!t.alpha_sparsity.empty()) os << "alpha_sparsity = " << schedule_text(t.alpha_sparsity) << "\n";
  os << "sparsity_normalize = " << (t.sparsity_normalize ? 1 : 0) << "\n";
  os << "noise_phase_switch_epoch = " << t.noise_phase_switch_epoch << "\n";
  os << "reassign_check_every = " << t.reassign_check_every << "\n";
  std::snprintf(buf, sizeof(buf), "reassign_threshold = %.12g\n", t.reassign_threshold);
  os << buf;
  os << "resample_every = " << t.resample_every << "\n";
  os << "resample_count = " << t.resample_count << "\n";
  os << "seed = " << t.seed << "\n";
  os << "n_pairs = " << m.n_pairs << "\n";
  os << "n_signal_pairs = " << m.n_signal_pairs << "\n";
  os << "n_noise_pairs = " << m.n_noise_pairs << "\n";
  os << "atom_length = " << m.atom_length << "\n";
  os << "detector_depth = " << m.detector_depth << "\n";
  os << "detector_kernel = " << m.detector_kernel << "\n";
  os << "detector_channels = " << m.detector_channels << "\n";
  os << "n_classes = " << m.n_classes << "\n";
}

DetectorSpec make_detector_spec(const ModelConfig& mc, bool scalar_head) {
  DetectorSpec spec;
  for (int i = 0; i < mc.detector_depth; ++i) {
    ConvLayerSpec l;
    l.in_channels = i == 0 ? 1 : mc.detector_channels;
    l.out_channels = mc.detector_channels;
    l.kernel_size = mc.detector_kernel;
    spec.layers.push_back(l);
  }
  spec.final_scalar = scalar_head;
  return spec;
}

ModelVariant build_model(Arch arch, const ModelConfig& mc, int input_len, Rng& rng) {
  mc.validate();
  switch (arch) {
    case Arch::basic:
      return BasicDecomposer::init(mc.n_pairs, make_detector_spec(mc, false), mc.atom_length, rng);
    case Arch::noise:
      return NoiseDecomposer::init(mc.n_signal_pairs, mc.n_noise_pairs, make_detector_spec(mc, false),
                                   mc.atom_length, rng);
    case Arch::ssvep:
      return SSVEPDecomposer::init(mc.n_classes, make_detector_spec(mc, false), mc.atom_length, rng);
    case Arch::erp:
      return ERPDecomposer::init(mc.n_pairs, mc.n_classes, make_detector_spec(mc, true), input_len, rng);
  }
  throw ConfigError("build_model: bad architecture");
}

}  // namespace datom
