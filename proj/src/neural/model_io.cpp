#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>

#include "kf/error.hpp"
#include "kf/neural.hpp"
#include "kf/sdre.hpp"

// Text format, whitespace separated:
//   kf-network 1
//   kind control|state_update
//   sizes <n> s_0 .. s_K
//   kinds <K> ...            activations <K+1> ...       recurrent <K> ...
//   input_scale <n> ...      input_shift <n> ...
//   output_scale <n> ...     output_shift <n> ...
//   layer <k> <blocks>, then per block: W <rows> <cols> row-major values, b <n> values
//   end

namespace kf {
namespace {

constexpr int kVersion = 1;

void write_vector(std::ostream& os, const char* tag, const Vector& v) {
  os << tag << ' ' << v.size();
  for (Index i = 0; i < v.size(); ++i) os << ' ' << format_double(v(i));
  os << '\n';
}

class Reader {
 public:
  explicit Reader(std::istream& is) : is_(is) {}

  std::string word() {
    std::string w;
    if (!(is_ >> w)) throw ConfigError("model file truncated");
    return w;
  }
  void expect(std::string_view tag) {
    const std::string w = word();
    if (w != tag) throw ConfigError("model file: expected '" + std::string(tag) + "', found '" + w + "'");
  }
  long integer() {
    const std::string w = word();
    long v = 0;
    auto [p, ec] = std::from_chars(w.data(), w.data() + w.size(), v);
    if (ec != std::errc{} || p != w.data() + w.size()) throw ConfigError("model file: bad integer '" + w + "'");
    return v;
  }
  double real() {
    const std::string w = word();
    double v = 0;
    auto [p, ec] = std::from_chars(w.data(), w.data() + w.size(), v);
    if (ec != std::errc{} || p != w.data() + w.size()) throw ConfigError("model file: bad number '" + w + "'");
    return v;
  }
  Vector vector(std::string_view tag) {
    expect(tag);
    const long n = integer();
    if (n < 0) throw ConfigError("model file: negative length");
    Vector v(n);
    for (long i = 0; i < n; ++i) v(i) = real();
    return v;
  }

 private:
  std::istream& is_;
};

}  // namespace

void save_model(std::ostream& os, const SurrogateModel& model) {
  const NetworkParams& p = model.params;
  validate(p);
  const Architecture& a = p.arch;
  os << "kf-network " << kVersion << '\n';
  os << "kind " << (model.kind == SurrogateKind::Control ? "control" : "state_update") << '\n';
  os << "sizes " << a.layer_sizes.size();
  for (int s : a.layer_sizes) os << ' ' << s;
  os << "\nkinds " << a.layer_kinds.size();
  for (LayerKind k : a.layer_kinds) os << ' ' << to_string(k);
  os << "\nactivations " << a.activations.size();
  for (Activation x : a.activations) os << ' ' << to_string(x);
  os << "\nrecurrent " << a.recurrent_activations.size();
  for (Activation x : a.recurrent_activations) os << ' ' << to_string(x);
  os << '\n';
  write_vector(os, "input_scale", p.input_scale);
  write_vector(os, "input_shift", p.input_shift);
  write_vector(os, "output_scale", p.output_scale);
  write_vector(os, "output_shift", p.output_shift);
  for (std::size_t k = 0; k < p.layers.size(); ++k) {
    const LayerParams& l = p.layers[k];
    os << "layer " << k << ' ' << l.W.size() << '\n';
    for (std::size_t g = 0; g < l.W.size(); ++g) {
      const Matrix& W = l.W[g];
      os << "W " << W.rows() << ' ' << W.cols();
      for (Index r = 0; r < W.rows(); ++r) {
        for (Index c = 0; c < W.cols(); ++c) os << ' ' << format_double(W(r, c));
      }
      os << '\n';
      write_vector(os, "b", l.b[g]);
    }
  }
  os << "end\n";
  if (!os) throw Error("model write failed");
}

void save_model(const std::filesystem::path& path, const SurrogateModel& model) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  save_model(os, model);
}

SurrogateModel load_model(std::istream& is) {
  Reader r(is);
  r.expect("kf-network");
  const long version = r.integer();
  if (version != kVersion) throw ConfigError("model file: unsupported version " + std::to_string(version));
  SurrogateModel m;
  r.expect("kind");
  const std::string kind = r.word();
  if (kind == "control") m.kind = SurrogateKind::Control;
  else if (kind == "state_update") m.kind = SurrogateKind::StateUpdate;
  else throw ConfigError("model file: unknown kind '" + kind + "'");

  Architecture a;
  r.expect("sizes");
  for (long n = r.integer(), i = 0; i < n; ++i) a.layer_sizes.push_back(static_cast<int>(r.integer()));
  r.expect("kinds");
  for (long n = r.integer(), i = 0; i < n; ++i) a.layer_kinds.push_back(layer_kind_from_string(r.word()));
  r.expect("activations");
  for (long n = r.integer(), i = 0; i < n; ++i) a.activations.push_back(activation_from_string(r.word()));
  r.expect("recurrent");
  for (long n = r.integer(), i = 0; i < n; ++i) a.recurrent_activations.push_back(activation_from_string(r.word()));
  try {
    validate(a);
  } catch (const Error& e) {
    throw ConfigError(std::string("model file: ") + e.what());
  }

  NetworkParams& p = m.params;
  p.arch = a;
  p.input_scale = r.vector("input_scale");
  p.input_shift = r.vector("input_shift");
  p.output_scale = r.vector("output_scale");
  p.output_shift = r.vector("output_shift");
  for (int k = 0; k < a.n_transitions(); ++k) {
    r.expect("layer");
    if (r.integer() != k) throw ConfigError("model file: layers out of order");
    const long blocks = r.integer();
    LayerParams l;
    for (long g = 0; g < blocks; ++g) {
      r.expect("W");
      const long rows = r.integer();
      const long cols = r.integer();
      if (rows < 0 || cols < 0) throw ConfigError("model file: negative matrix shape");
      Matrix W(rows, cols);
      for (long i = 0; i < rows; ++i) {
        for (long j = 0; j < cols; ++j) W(i, j) = r.real();
      }
      l.W.push_back(std::move(W));
      l.b.push_back(r.vector("b"));
    }
    p.layers.push_back(std::move(l));
  }
  r.expect("end");
  try {
    validate(p);
  } catch (const Error& e) {
    throw ConfigError(std::string("model file: ") + e.what());
  }
  return m;
}

SurrogateModel load_model(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open model file " + path.string());
  return load_model(is);
}

}  // namespace kf
