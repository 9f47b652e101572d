#include "datom/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

namespace datom {

void DetectorSpec::validate() const {
  if (layers.empty()) throw ConfigError("detector: needs at least one layer");
  if (layers.front().in_channels != 1) throw ConfigError("detector: first layer must take 1 channel");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    if (l.in_channels < 1 || l.out_channels < 1 || l.kernel_size < 1)
      throw ConfigError("detector: layer " + std::to_string(i) + " has non-positive dimensions");
    if (i + 1 < layers.size() && l.out_channels != layers[i + 1].in_channels)
      throw ConfigError("detector: layer " + std::to_string(i) + " output channels do not match next layer");
  }
}

namespace {

Eigen::ArrayXXd uniform_array(Eigen::Index rows, Eigen::Index cols, double bound, Rng& rng) {
  Eigen::ArrayXXd a(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) a(i, j) = rng.uniform(-bound, bound);
  return a;
}

}  // namespace

DetectorParams init_detector(const std::string& prefix, const DetectorSpec& spec, Rng& rng) {
  spec.validate();
  DetectorParams d;
  d.spec = spec;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& l = spec.layers[i];
    const double b = 1.0 / std::sqrt(static_cast<double>(l.in_channels) * l.kernel_size);
    d.taps.emplace_back(prefix + ".layer" + std::to_string(i) + ".taps",
                        uniform_array(l.kernel_size, static_cast<Eigen::Index>(l.in_channels) * l.out_channels, b, rng));
    d.biases.emplace_back(prefix + ".layer" + std::to_string(i) + ".bias",
                          uniform_array(l.out_channels, 1, b, rng));
  }
  if (spec.final_scalar) {
    const int c = spec.layers.back().out_channels;
    const double b = 1.0 / std::sqrt(static_cast<double>(c));
    d.head_w = Parameter(prefix + ".head.w", uniform_array(c, 1, b, rng));
    d.head_b = Parameter(prefix + ".head.b", uniform_array(1, 1, b, rng));
  }
  return d;
}

Parameter init_atom(const std::string& id, int atom_len, Rng& rng) {
  if (atom_len < 1) throw ConfigError("atom: length must be >= 1");
  const double b = 1.0 / std::sqrt(static_cast<double>(atom_len));
  return Parameter(id, uniform_array(atom_len, 1, b, rng));
}

DetectorAtomPair init_pair(const std::string& prefix, const DetectorSpec& spec, int atom_len, Rng& rng) {
  DetectorAtomPair p;
  p.detector = init_detector(prefix, spec, rng);
  p.atom = init_atom(prefix + ".atom", atom_len, rng);
  return p;
}

void collect_parameters(DetectorParams& d, std::vector<Parameter*>& out) {
  for (std::size_t i = 0; i < d.taps.size(); ++i) {
    out.push_back(&d.taps[i]);
    out.push_back(&d.biases[i]);
  }
  if (d.head_w) out.push_back(&*d.head_w);
  if (d.head_b) out.push_back(&*d.head_b);
}

namespace {

Expr weight(Tape& t, Parameter& p, bool track) { return track ? t.param(p) : t.input(p.value); }

// Shared conv stack: each layer conv + ReLU; a multi-channel last layer is
// summed across channels before its ReLU.
Expr conv_stack(Tape& t, DetectorParams& d, Expr x, bool track, bool merge_last) {
  Expr h = x;
  for (std::size_t i = 0; i < d.spec.layers.size(); ++i) {
    const auto& l = d.spec.layers[i];
    Expr k = weight(t, d.taps[i], track);
    Expr b = weight(t, d.biases[i], track);
    h = t.conv1d(h, k, &b, l.in_channels, l.out_channels);
    const bool last = i + 1 == d.spec.layers.size();
    if (last && merge_last && l.out_channels > 1) h = channel_sum(h);
    h = relu(h);
  }
  return h;
}

}  // namespace

Expr detector_forward(Tape& t, DetectorParams& d, Expr x, bool track) {
  if (d.spec.final_scalar) throw ConfigError("detector_forward: spec is scalar, use detector_forward_scalar");
  return conv_stack(t, d, x, track, /*merge_last=*/true);
}

Expr detector_forward_scalar(Tape& t, DetectorParams& d, Expr x, bool track) {
  if (!d.spec.final_scalar) throw ConfigError("detector_forward_scalar: spec is not scalar");
  Expr h = conv_stack(t, d, x, track, /*merge_last=*/false);
  Expr pooled = time_sum(h);
  Expr out = linear(pooled, weight(t, *d.head_w, track), weight(t, *d.head_b, track));
  return relu(out);
}

Expr atom_forward(Tape& t, Parameter& atom, Expr z, bool track) {
  return t.conv1d(z, weight(t, atom, track), nullptr, 1, 1);
}

BankForward bank_forward(Tape& t, std::vector<DetectorAtomPair>& pairs, Expr x, bool track) {
  if (pairs.empty()) throw ConfigError("bank_forward: empty bank");
  BankForward f;
  for (auto& p : pairs) {
    Expr z = detector_forward(t, p.detector, x, track);
    Expr c = atom_forward(t, p.atom, z, track);
    f.activations.push_back(z);
    f.components.push_back(c);
    f.reconstruction = f.components.size() == 1 ? c : f.reconstruction + c;
  }
  return f;
}

BasicDecomposer BasicDecomposer::init(int n_pairs, const DetectorSpec& det, int atom_len, Rng& rng) {
  if (n_pairs < 1) throw ConfigError("basic: n_pairs must be >= 1");
  BasicDecomposer m;
  for (int n = 0; n < n_pairs; ++n)
    m.pairs.push_back(init_pair("pair" + std::to_string(n), det, atom_len, rng));
  return m;
}

std::vector<Parameter*> BasicDecomposer::parameters() {
  std::vector<Parameter*> out;
  for (auto& p : pairs) {
    collect_parameters(p.detector, out);
    out.push_back(&p.atom);
  }
  return out;
}

BankForward basic_forward(Tape& t, BasicDecomposer& m, Expr x, bool track) {
  return bank_forward(t, m.pairs, x, track);
}

NoiseDecomposer NoiseDecomposer::init(int n_signal, int n_noise, const DetectorSpec& det, int atom_len,
                                      Rng& rng) {
  if (n_signal < 1 || n_noise < 1) throw ConfigError("noise: both banks need at least one pair");
  NoiseDecomposer m;
  for (int n = 0; n < n_signal; ++n)
    m.signal_pairs.push_back(init_pair("s" + std::to_string(n), det, atom_len, rng));
  for (int n = 0; n < n_noise; ++n)
    m.noise_pairs.push_back(init_pair("n" + std::to_string(n), det, atom_len, rng));
  return m;
}

std::vector<Parameter*> NoiseDecomposer::parameters() {
  std::vector<Parameter*> out;
  for (auto& p : signal_pairs) {
    collect_parameters(p.detector, out);
    out.push_back(&p.atom);
  }
  for (auto& p : noise_pairs) {
    collect_parameters(p.detector, out);
    out.push_back(&p.atom);
  }
  return out;
}

NoiseForwardResult noise_forward(Tape& t, NoiseDecomposer& m, Expr x, bool track, bool cross_detach) {
  NoiseForwardResult r;
  r.noise = bank_forward(t, m.noise_pairs, x, track);
  r.n_hat = r.noise.reconstruction;
  Expr n_for_signal = cross_detach ? detach(r.n_hat) : r.n_hat;
  r.signal = bank_forward(t, m.signal_pairs, x - n_for_signal, track);
  r.s_hat = r.signal.reconstruction;
  return r;
}

SSVEPDecomposer SSVEPDecomposer::init(int n_classes, const DetectorSpec& det, int atom_len, Rng& rng) {
  if (n_classes < 1) throw ConfigError("ssvep: need at least one class");
  SSVEPDecomposer m;
  for (int l = 0; l < n_classes; ++l)
    m.detectors.push_back(init_detector("det" + std::to_string(l), det, rng));
  m.atom = init_atom("atom", atom_len, rng);
  return m;
}

std::vector<Parameter*> SSVEPDecomposer::parameters() {
  std::vector<Parameter*> out;
  for (auto& d : detectors) collect_parameters(d, out);
  out.push_back(&atom);
  return out;
}

SSVEPForwardResult ssvep_forward(Tape& t, SSVEPDecomposer& m, Expr x, bool track) {
  SSVEPForwardResult r;
  Expr atom = track ? t.param(m.atom) : t.input(m.atom.value);  // one node, shared by every class
  for (auto& d : m.detectors) {
    Expr z = detector_forward(t, d, x, track);
    Expr c = t.conv1d(z, atom, nullptr, 1, 1);
    r.activations.push_back(z);
    r.components.push_back(c);
    r.reconstruction = r.components.size() == 1 ? c : r.reconstruction + c;
  }
  return r;
}

ERPDecomposer ERPDecomposer::init(int n_pairs, int n_classes, const DetectorSpec& det, int input_len,
                                  Rng& rng) {
  if (n_pairs < 1) throw ConfigError("erp: n_pairs must be >= 1");
  if (n_classes < 1 || n_classes > n_pairs) throw ConfigError("erp: n_classes must be in [1, n_pairs]");
  DetectorSpec spec = det;
  spec.final_scalar = true;
  ERPDecomposer m;
  m.num_classes = n_classes;
  for (int p = 0; p < n_pairs; ++p) {
    m.pairs.push_back(init_pair("pair" + std::to_string(p), spec, input_len, rng));
    m.pair_class.push_back(1 + p * n_classes / n_pairs);
  }
  return m;
}

std::vector<Parameter*> ERPDecomposer::parameters() {
  std::vector<Parameter*> out;
  for (auto& p : pairs) {
    collect_parameters(p.detector, out);
    out.push_back(&p.atom);
  }
  return out;
}

ERPForwardResult erp_forward(Tape& t, ERPDecomposer& m, Expr x, bool track) {
  if (t.value(x).rows() != m.input_length())
    throw CompatibilityError("erp_forward: input length " + std::to_string(t.value(x).rows()) +
                             " != atom length " + std::to_string(m.input_length()));
  ERPForwardResult r;
  for (auto& p : m.pairs) {
    Expr w = detector_forward_scalar(t, p.detector, x, track);
    Expr atom = track ? t.param(p.atom) : t.input(p.atom.value);
    Expr c = scalar_mul(w, atom);
    r.weights.push_back(w);
    r.components.push_back(c);
    r.reconstruction = r.components.size() == 1 ? c : r.reconstruction + c;
  }
  return r;
}

std::vector<int> detect_dead_atoms(const std::vector<DetectorAtomPair>& bank, double threshold) {
  std::vector<double> norms;
  norms.reserve(bank.size());
  for (const auto& p : bank) norms.push_back(p.atom.value.matrix().norm());
  std::vector<double> sorted = norms;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t h = sorted.size() / 2;
  const double median =
      sorted.size() % 2 ? sorted[h] : 0.5 * (sorted[h - 1] + sorted[h]);
  std::vector<int> dead;
  for (std::size_t n = 0; n < norms.size(); ++n)
    if (norms[n] < threshold * median) dead.push_back(static_cast<int>(n));
  return dead;
}

void atom_reassign(std::vector<DetectorAtomPair>& bank, int dead, int donor) {
  const int n = static_cast<int>(bank.size());
  if (dead < 0 || dead >= n || donor < 0 || donor >= n)
    throw std::invalid_argument("atom_reassign: index out of range");
  if (dead == donor) throw std::invalid_argument("atom_reassign: dead and donor must differ");
  DetectorAtomPair& k = bank[static_cast<std::size_t>(dead)];
  DetectorAtomPair& r = bank[static_cast<std::size_t>(donor)];
  if (k.atom.value.rows() != r.atom.value.rows())
    throw std::invalid_argument("atom_reassign: atom lengths differ");
  if (k.detector.taps.size() != r.detector.taps.size())
    throw std::invalid_argument("atom_reassign: detector depths differ");
  for (std::size_t i = 0; i < k.detector.taps.size(); ++i)
    if (k.detector.taps[i].value.rows() != r.detector.taps[i].value.rows() ||
        k.detector.taps[i].value.cols() != r.detector.taps[i].value.cols())
      throw std::invalid_argument("atom_reassign: detector shapes differ");

  for (std::size_t i = 0; i < k.detector.taps.size(); ++i) {
    k.detector.taps[i].value = r.detector.taps[i].value;
    k.detector.biases[i].value = r.detector.biases[i].value;
  }
  if (r.detector.head_w) k.detector.head_w->value = r.detector.head_w->value;
  if (r.detector.head_b) k.detector.head_b->value = r.detector.head_b->value;

  // First half (odd lengths round up) to the revived pair, second stays with
  // the donor; the pair sum equals the donor's old single-atom output.
  const Eigen::Index m = r.atom.value.rows();
  const Eigen::Index h = (m + 1) / 2;
  k.atom.value.setZero();
  k.atom.value.topRows(h) = r.atom.value.topRows(h);
  r.atom.value.topRows(h).setZero();

  k.atom.zero_grad();
  r.atom.zero_grad();
  for (std::size_t i = 0; i < k.detector.taps.size(); ++i) {
    k.detector.taps[i].zero_grad();
    k.detector.biases[i].zero_grad();
  }
  if (k.detector.head_w) k.detector.head_w->zero_grad();
  if (k.detector.head_b) k.detector.head_b->zero_grad();
}

Arch arch_of(const ModelVariant& m) { return static_cast<Arch>(m.index()); }

std::string arch_name(Arch a) {
  switch (a) {
    case Arch::basic: return "basic";
    case Arch::noise: return "noise";
    case Arch::ssvep: return "ssvep";
    case Arch::erp: return "erp";
  }
  throw std::invalid_argument("arch_name: bad tag");
}

Arch arch_from_name(const std::string& name) {
  if (name == "basic") return Arch::basic;
  if (name == "noise") return Arch::noise;
  if (name == "ssvep") return Arch::ssvep;
  if (name == "erp") return Arch::erp;
  throw ConfigError("unknown architecture: " + name + " (expected basic|noise|ssvep|erp)");
}

std::vector<Parameter*> parameters(ModelVariant& m) {
  return std::visit([](auto& v) { return v.parameters(); }, m);
}

std::vector<std::vector<DetectorAtomPair>*> reassignable_banks(ModelVariant& m) {
  std::vector<std::vector<DetectorAtomPair>*> banks;
  if (auto* b = std::get_if<BasicDecomposer>(&m)) banks.push_back(&b->pairs);
  if (auto* n = std::get_if<NoiseDecomposer>(&m)) {
    banks.push_back(&n->signal_pairs);
    banks.push_back(&n->noise_pairs);
  }
  if (auto* e = std::get_if<ERPDecomposer>(&m)) banks.push_back(&e->pairs);
  return banks;
}

Decomposition decompose(const ModelVariant& m, const Signal& x) {
  // track=false never writes through the model, so the cast is safe.
  auto& mm = const_cast<ModelVariant&>(m);
  Tape t;
  Expr xin = t.input_signal(x);
  Decomposition d;
  auto col = [&](Expr e) { return Signal(t.value(e).col(0)); };

  if (auto* basic = std::get_if<BasicDecomposer>(&mm)) {
    auto f = basic_forward(t, *basic, xin, false);
    for (std::size_t n = 0; n < f.components.size(); ++n) {
      d.names.push_back("component_" + std::to_string(n + 1));
      d.components.push_back(col(f.components[n]));
    }
    d.reconstruction = col(f.reconstruction);
  } else if (auto* noise = std::get_if<NoiseDecomposer>(&mm)) {
    auto f = noise_forward(t, *noise, xin, false, false);
    for (std::size_t n = 0; n < f.signal.components.size(); ++n) {
      d.names.push_back("s_" + std::to_string(n + 1));
      d.components.push_back(col(f.signal.components[n]));
    }
    for (std::size_t n = 0; n < f.noise.components.size(); ++n) {
      d.names.push_back("n_" + std::to_string(n + 1));
      d.components.push_back(col(f.noise.components[n]));
    }
    d.s_hat = col(f.s_hat);
    d.n_hat = col(f.n_hat);
    d.reconstruction = *d.s_hat + *d.n_hat;
  } else if (auto* ssvep = std::get_if<SSVEPDecomposer>(&mm)) {
    auto f = ssvep_forward(t, *ssvep, xin, false);
    for (std::size_t n = 0; n < f.components.size(); ++n) {
      d.names.push_back("class_" + std::to_string(n + 1));
      d.components.push_back(col(f.components[n]));
    }
    d.reconstruction = col(f.reconstruction);
  } else if (auto* erp = std::get_if<ERPDecomposer>(&mm)) {
    auto f = erp_forward(t, *erp, xin, false);
    for (std::size_t n = 0; n < f.components.size(); ++n) {
      d.names.push_back("component_" + std::to_string(n + 1));
      d.components.push_back(col(f.components[n]));
      d.weights.push_back(t.scalar_value(f.weights[n]));
    }
    d.reconstruction = col(f.reconstruction);
  }
  return d;
}

// ---- serialization ----------------------------------------------------

namespace {

constexpr char kMagic[4] = {'D', 'T', 'M', 'M'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                     static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  os.write(b, 4);
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw IoError("model: truncated file");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_spec(std::ostream& os, const DetectorSpec& s) {
  put_u32(os, static_cast<std::uint32_t>(s.layers.size()));
  for (const auto& l : s.layers) {
    put_u32(os, static_cast<std::uint32_t>(l.in_channels));
    put_u32(os, static_cast<std::uint32_t>(l.out_channels));
    put_u32(os, static_cast<std::uint32_t>(l.kernel_size));
  }
  const char flag = s.final_scalar ? 1 : 0;
  os.write(&flag, 1);
}

DetectorSpec get_spec(std::istream& is) {
  DetectorSpec s;
  const std::uint32_t n = get_u32(is);
  if (n == 0 || n > 1024) throw IoError("model: bad layer count");
  for (std::uint32_t i = 0; i < n; ++i) {
    ConvLayerSpec l;
    l.in_channels = static_cast<int>(get_u32(is));
    l.out_channels = static_cast<int>(get_u32(is));
    l.kernel_size = static_cast<int>(get_u32(is));
    s.layers.push_back(l);
  }
  char flag = 0;
  if (!is.read(&flag, 1)) throw IoError("model: truncated file");
  s.final_scalar = flag != 0;
  try {
    s.validate();
  } catch (const ConfigError& e) {
    throw IoError(std::string("model: invalid stored spec: ") + e.what());
  }
  return s;
}

void put_blob(std::ostream& os, const Parameter& p) {
  for (Eigen::Index i = 0; i < p.value.size(); ++i)
    put_u32(os, std::bit_cast<std::uint32_t>(static_cast<float>(p.value.data()[i])));
}

void get_blob(std::istream& is, Parameter& p) {
  for (Eigen::Index i = 0; i < p.value.size(); ++i)
    p.value.data()[i] = static_cast<double>(std::bit_cast<float>(get_u32(is)));
}

void put_detector(std::ostream& os, const DetectorParams& d) {
  for (std::size_t i = 0; i < d.taps.size(); ++i) {
    put_blob(os, d.taps[i]);
    put_blob(os, d.biases[i]);
  }
  if (d.head_w) put_blob(os, *d.head_w);
  if (d.head_b) put_blob(os, *d.head_b);
}

void get_detector(std::istream& is, DetectorParams& d) {
  for (std::size_t i = 0; i < d.taps.size(); ++i) {
    get_blob(is, d.taps[i]);
    get_blob(is, d.biases[i]);
  }
  if (d.head_w) get_blob(is, *d.head_w);
  if (d.head_b) get_blob(is, *d.head_b);
}

// Zero-valued skeleton with the right shapes, filled from the blob section.
DetectorParams blank_detector(const std::string& prefix, const DetectorSpec& spec) {
  DetectorParams d;
  d.spec = spec;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& l = spec.layers[i];
    d.taps.emplace_back(prefix + ".layer" + std::to_string(i) + ".taps", l.kernel_size,
                        static_cast<Eigen::Index>(l.in_channels) * l.out_channels);
    d.biases.emplace_back(prefix + ".layer" + std::to_string(i) + ".bias", l.out_channels, 1);
  }
  if (spec.final_scalar) {
    const int c = spec.layers.back().out_channels;
    d.head_w = Parameter(prefix + ".head.w", c, 1);
    d.head_b = Parameter(prefix + ".head.b", 1, 1);
  }
  return d;
}

std::uint32_t checked_count(std::istream& is, const char* what) {
  const std::uint32_t n = get_u32(is);
  if (n == 0 || n > 65536) throw IoError(std::string("model: bad ") + what);
  return n;
}

}  // namespace

void save_model(std::ostream& os, const ModelVariant& m) {
  os.write(kMagic, 4);
  put_u32(os, kVersion);
  put_u32(os, static_cast<std::uint32_t>(arch_of(m)));
  if (const auto* b = std::get_if<BasicDecomposer>(&m)) {
    put_u32(os, static_cast<std::uint32_t>(b->pairs.size()));
    for (const auto& p : b->pairs) {
      put_spec(os, p.detector.spec);
      put_u32(os, static_cast<std::uint32_t>(p.atom.value.rows()));
    }
    for (const auto& p : b->pairs) {
      put_detector(os, p.detector);
      put_blob(os, p.atom);
    }
  } else if (const auto* n = std::get_if<NoiseDecomposer>(&m)) {
    for (const auto* bank : {&n->signal_pairs, &n->noise_pairs}) {
      put_u32(os, static_cast<std::uint32_t>(bank->size()));
      for (const auto& p : *bank) {
        put_spec(os, p.detector.spec);
        put_u32(os, static_cast<std::uint32_t>(p.atom.value.rows()));
      }
    }
    for (const auto* bank : {&n->signal_pairs, &n->noise_pairs})
      for (const auto& p : *bank) {
        put_detector(os, p.detector);
        put_blob(os, p.atom);
      }
  } else if (const auto* s = std::get_if<SSVEPDecomposer>(&m)) {
    put_u32(os, static_cast<std::uint32_t>(s->detectors.size()));
    for (const auto& d : s->detectors) put_spec(os, d.spec);
    put_u32(os, static_cast<std::uint32_t>(s->atom.value.rows()));
    for (const auto& d : s->detectors) put_detector(os, d);
    put_blob(os, s->atom);
  } else if (const auto* e = std::get_if<ERPDecomposer>(&m)) {
    put_u32(os, static_cast<std::uint32_t>(e->pairs.size()));
    for (const auto& p : e->pairs) put_spec(os, p.detector.spec);
    put_u32(os, static_cast<std::uint32_t>(e->input_length()));
    put_u32(os, static_cast<std::uint32_t>(e->num_classes));
    for (int c : e->pair_class) put_u32(os, static_cast<std::uint32_t>(c));
    for (const auto& p : e->pairs) {
      put_detector(os, p.detector);
      put_blob(os, p.atom);
    }
  }
}

ModelVariant load_model(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw IoError("model: bad magic");
  const std::uint32_t version = get_u32(is);
  if (version != kVersion) throw IoError("model: unsupported version " + std::to_string(version));
  const std::uint32_t arch = get_u32(is);

  switch (static_cast<Arch>(arch)) {
    case Arch::basic: {
      BasicDecomposer m;
      const std::uint32_t n = checked_count(is, "pair count");
      std::vector<int> atom_lens;
      std::vector<DetectorSpec> specs;
      for (std::uint32_t i = 0; i < n; ++i) {
        specs.push_back(get_spec(is));
        atom_lens.push_back(static_cast<int>(checked_count(is, "atom length")));
      }
      for (std::uint32_t i = 0; i < n; ++i) {
        DetectorAtomPair p;
        const std::string prefix = "pair" + std::to_string(i);
        p.detector = blank_detector(prefix, specs[i]);
        p.atom = Parameter(prefix + ".atom", atom_lens[i], 1);
        get_detector(is, p.detector);
        get_blob(is, p.atom);
        m.pairs.push_back(std::move(p));
      }
      return m;
    }
    case Arch::noise: {
      NoiseDecomposer m;
      for (auto [bank, tag] : {std::pair{&m.signal_pairs, "s"}, std::pair{&m.noise_pairs, "n"}}) {
        const std::uint32_t n = checked_count(is, "bank size");
        for (std::uint32_t i = 0; i < n; ++i) {
          DetectorAtomPair p;
          const std::string prefix = tag + std::to_string(i);
          p.detector = blank_detector(prefix, get_spec(is));
          p.atom = Parameter(prefix + ".atom", static_cast<int>(checked_count(is, "atom length")), 1);
          bank->push_back(std::move(p));
        }
      }
      for (auto* bank : {&m.signal_pairs, &m.noise_pairs})
        for (auto& p : *bank) {
          get_detector(is, p.detector);
          get_blob(is, p.atom);
        }
      return m;
    }
    case Arch::ssvep: {
      SSVEPDecomposer m;
      const std::uint32_t n = checked_count(is, "detector count");
      for (std::uint32_t i = 0; i < n; ++i)
        m.detectors.push_back(blank_detector("det" + std::to_string(i), get_spec(is)));
      m.atom = Parameter("atom", static_cast<int>(checked_count(is, "atom length")), 1);
      for (auto& d : m.detectors) get_detector(is, d);
      get_blob(is, m.atom);
      return m;
    }
    case Arch::erp: {
      ERPDecomposer m;
      const std::uint32_t n = checked_count(is, "pair count");
      std::vector<DetectorSpec> specs;
      for (std::uint32_t i = 0; i < n; ++i) specs.push_back(get_spec(is));
      const int atom_len = static_cast<int>(checked_count(is, "atom length"));
      m.num_classes = static_cast<int>(checked_count(is, "class count"));
      for (std::uint32_t i = 0; i < n; ++i) {
        const auto c = get_u32(is);
        if (c < 1 || c > static_cast<std::uint32_t>(m.num_classes)) throw IoError("model: bad pair class");
        m.pair_class.push_back(static_cast<int>(c));
      }
      for (std::uint32_t i = 0; i < n; ++i) {
        DetectorAtomPair p;
        const std::string prefix = "pair" + std::to_string(i);
        p.detector = blank_detector(prefix, specs[i]);
        p.atom = Parameter(prefix + ".atom", atom_len, 1);
        get_detector(is, p.detector);
        get_blob(is, p.atom);
        m.pairs.push_back(std::move(p));
      }
      return m;
    }
    default:
      throw IoError("model: unknown architecture tag " + std::to_string(arch));
  }
}

void save_model(const std::string& path, const ModelVariant& m) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("model: cannot open for writing: " + path);
  save_model(os, m);
  if (!os) throw IoError("model: write failed: " + path);
}

ModelVariant load_model(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("model: cannot open: " + path);
  return load_model(is);
}

void quantize_f32(ModelVariant& m) {
  for (Parameter* p : parameters(m))
    for (Eigen::Index i = 0; i < p->value.size(); ++i)
      p->value.data()[i] = static_cast<double>(static_cast<float>(p->value.data()[i]));
}

}  // namespace datom
