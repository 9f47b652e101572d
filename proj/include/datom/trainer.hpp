#pragma once

#include "datom/losses.hpp"
#include "datom/model.hpp"
#include "datom/signal.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace datom {

struct ScheduleEntry {
  int start_epoch = 0;
  double value = 0.0;
};

struct TrainConfig {
  int epochs = 1000;
  int batch_size = 100;
  double lr = 0.001;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double weight_decay = 1e-5;
  double adam_eps = 1e-8;

  // Sparsity weight by epoch: the entry with the largest start_epoch <= epoch
  // applies; zero before the first entry.
  std::vector<ScheduleEntry> alpha_sparsity;
  bool sparsity_normalize = false;

  // Noise variant: refined masked loss from this epoch on (< 0 keeps the
  // initial form throughout).
  int noise_phase_switch_epoch = -1;

  // Dead-atom checks run at the start of every k-th epoch (0 disables).
  int reassign_check_every = 0;
  double reassign_threshold = 1e-3;

  // Re-draw the training pool every k epochs (0 trains on everything).
  int resample_every = 0;
  int resample_count = 0;

  std::uint64_t seed = 0;

  void validate() const;
};

double alpha_at(const TrainConfig& cfg, int epoch);
NoisePhase phase_at(const TrainConfig& cfg, int epoch);

struct EpochRecord {
  int epoch = 0;
  double total = 0.0;
  double fidelity = 0.0;  // reconstruction term of the variant's loss
  double sparsity = 0.0;  // raw l1 of the activations, before weighting
  int reassigns = 0;
};

struct TrainHistory {
  std::vector<EpochRecord> records;
  void write_csv(std::ostream& os) const;
};

// Minimizes the variant's loss with per-batch Adam steps. Deterministic for a
// fixed seed: one RNG drives the epoch shuffles (and resampling) in a fixed
// order and nothing runs concurrently. Throws NumericError when the loss
// stops being finite, CompatibilityError when the dataset does not fit the
// model (missing masks or labels, wrong length).
TrainHistory train(ModelVariant& model, const Dataset& data, const TrainConfig& cfg);

// ---- run configuration files -------------------------------------------
//
// "datom-config v1" header, then `key = value` lines (# comments allowed).
// Training keys mirror TrainConfig (alpha_sparsity is `epoch:value` pairs
// separated by commas); model keys describe the decomposer to build.

struct ModelConfig {
  int n_pairs = 4;          // basic / erp pair count
  int n_signal_pairs = 2;   // noise variant banks
  int n_noise_pairs = 2;
  int atom_length = 32;
  int detector_depth = 1;
  int detector_kernel = 33;
  int detector_channels = 1;
  int n_classes = 2;  // ssvep / erp

  void validate() const;
};

struct RunConfig {
  TrainConfig train;
  ModelConfig model;
};

RunConfig parse_run_config(std::istream& is);
RunConfig load_run_config(const std::string& path);
void write_run_config(std::ostream& os, const RunConfig& cfg);

DetectorSpec make_detector_spec(const ModelConfig& mc, bool scalar_head);

// input_len is the dataset sample length (erp atoms span it).
ModelVariant build_model(Arch arch, const ModelConfig& mc, int input_len, Rng& rng);

}  // namespace datom
