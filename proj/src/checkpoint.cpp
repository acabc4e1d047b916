#include "neurotube/checkpoint.hpp"

#include <openssl/evp.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <memory>
#include <sstream>

#include "neurotube/error.hpp"

namespace neurotube {

namespace {

constexpr const char* kMetaUnet = "meta.unet";
constexpr const char* kMetaAux = "meta.aux";
constexpr const char* kMetaAdam = "meta.adam";

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

std::uint32_t to_u32(std::size_t v, const char* what) {
  if (v > 0xffffffffu) throw DimensionError(std::string("checkpoint: ") + what + " too large");
  return static_cast<std::uint32_t>(v);
}

struct Reader {
  const std::vector<unsigned char>& bytes;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (bytes.size() - pos < n)
      throw FormatError("checkpoint truncated at byte " + std::to_string(pos) + ": need " +
                        std::to_string(n) + " more bytes, have " + std::to_string(bytes.size() - pos));
  }
  std::uint32_t u32() {
    need(4);
    const unsigned char* p = bytes.data() + pos;
    pos += 4;
    return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
           std::uint32_t(p[3]) << 24;
  }
  float f32() { return std::bit_cast<float>(u32()); }
};

struct NamedTensor {
  std::string name;
  Shape shape;
  std::vector<float> values;
};

NamedTensor meta(const char* name, std::vector<double> values) {
  NamedTensor t{name, {values.size()}, {}};
  for (double v : values) t.values.push_back(static_cast<float>(v));
  return t;
}

NamedTensor named(const std::string& name, const Shape& shape, std::span<const real> data) {
  return {name, shape, std::vector<float>(data.begin(), data.end())};
}

std::size_t as_size(float v) { return static_cast<std::size_t>(v); }

}  // namespace

std::string canonical_config_text(const UNetConfig& u, const std::optional<AuxHeadConfig>& aux) {
  std::ostringstream os;
  os << "unet.depth=" << u.depth << '\n'
     << "unet.base_channels=" << u.base_channels << '\n'
     << "unet.in_channels=" << u.in_channels << '\n'
     << "unet.out_channels=" << u.out_channels << '\n'
     << "unet.input_size=" << u.input_size.x << ' ' << u.input_size.y << ' ' << u.input_size.z << '\n'
     << "unet.use_groupnorm=" << (u.use_groupnorm ? 1 : 0) << '\n';
  if (aux)
    os << "aux.hidden_units=" << aux->hidden_units << '\n'
       << "aux.num_classes=" << aux->num_classes << '\n'
       << "aux.input_features=" << aux->input_features << '\n';
  return os.str();
}

Fingerprint config_fingerprint(const std::string& text) {
  Fingerprint fp{};
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), text.data(), text.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), fp.data(), &len) != 1 || len != fp.size())
    throw StateError("SHA-256 computation failed");
  return fp;
}

std::string fingerprint_hex(const Fingerprint& fp) {
  static const char* digits = "0123456789abcdef";
  std::string s;
  for (auto b : fp) {
    s.push_back(digits[b >> 4]);
    s.push_back(digits[b & 15]);
  }
  return s;
}

Fingerprint Checkpoint::fingerprint() const {
  return config_fingerprint(canonical_config_text(unet, aux));
}

std::vector<unsigned char> encode_checkpoint(const Checkpoint& ckpt) {
  std::vector<NamedTensor> tensors;
  const auto& u = ckpt.unet;
  tensors.push_back(meta(kMetaUnet, {double(u.depth), double(u.base_channels), double(u.in_channels),
                                     double(u.out_channels), double(u.input_size.x),
                                     double(u.input_size.y), double(u.input_size.z),
                                     u.use_groupnorm ? 1.0 : 0.0}));
  if (ckpt.aux)
    tensors.push_back(meta(kMetaAux, {double(ckpt.aux->hidden_units), double(ckpt.aux->num_classes),
                                      double(ckpt.aux->input_features)}));
  if (ckpt.adam) {
    const auto& a = *ckpt.adam;
    tensors.push_back(
        meta(kMetaAdam, {double(a.step_count), a.lr, a.beta1, a.beta2, a.eps, a.m.empty() ? 0.0 : 1.0}));
  }
  for (const auto& [name, t] : ckpt.params) tensors.push_back(named(name, t.shape(), t.data()));
  if (ckpt.adam && !ckpt.adam->m.empty()) {
    const auto& a = *ckpt.adam;
    if (a.m.size() != ckpt.params.size() || a.v.size() != ckpt.params.size())
      throw StateError("checkpoint: optimizer state does not match parameter count");
    std::size_t i = 0;
    for (const auto& [name, t] : ckpt.params) {
      tensors.push_back(named("adam.m." + name, t.shape(), a.m[i]));
      tensors.push_back(named("adam.v." + name, t.shape(), a.v[i]));
      ++i;
    }
  }

  std::vector<unsigned char> out{'C', 'K', 'P', 'T'};
  put_u32(out, ckpt.version);
  const auto fp = ckpt.fingerprint();
  out.insert(out.end(), fp.begin(), fp.end());
  put_u32(out, to_u32(tensors.size(), "tensor count"));
  for (const auto& t : tensors) {
    put_u32(out, to_u32(t.name.size(), "name"));
    out.insert(out.end(), t.name.begin(), t.name.end());
    put_u32(out, to_u32(t.shape.size(), "rank"));
    for (auto d : t.shape) put_u32(out, to_u32(d, "dim"));
    if (shape_numel(t.shape) != t.values.size())
      throw StateError("checkpoint: tensor '" + t.name + "' has inconsistent shape");
    for (float f : t.values) put_u32(out, std::bit_cast<std::uint32_t>(f));
  }
  return out;
}

Checkpoint decode_checkpoint(const std::vector<unsigned char>& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "CKPT", 4) != 0)
    throw FormatError("bad magic: not a CKPT checkpoint");
  Reader r{bytes, 4};
  Checkpoint ckpt;
  ckpt.version = r.u32();
  if (ckpt.version != kCheckpointVersion)
    throw FormatError("unsupported checkpoint version " + std::to_string(ckpt.version));
  r.need(32);
  Fingerprint stored;
  std::memcpy(stored.data(), bytes.data() + r.pos, 32);
  r.pos += 32;
  const std::uint32_t count = r.u32();

  std::map<std::string, NamedTensor> all;
  std::vector<std::string> order;
  for (std::uint32_t k = 0; k < count; ++k) {
    NamedTensor t;
    const std::uint32_t name_len = r.u32();
    r.need(name_len);
    t.name.assign(reinterpret_cast<const char*>(bytes.data() + r.pos), name_len);
    r.pos += name_len;
    const std::uint32_t rank = r.u32();
    for (std::uint32_t i = 0; i < rank; ++i) t.shape.push_back(r.u32());
    const std::size_t n = shape_numel(t.shape);
    r.need(4 * n);
    t.values.resize(n);
    for (auto& v : t.values) v = r.f32();
    if (!all.emplace(t.name, t).second)
      throw FormatError("checkpoint: duplicate tensor '" + t.name + "'");
    order.push_back(t.name);
  }
  if (r.pos != bytes.size())
    throw FormatError("checkpoint: " + std::to_string(bytes.size() - r.pos) + " trailing bytes");

  const auto um = all.find(kMetaUnet);
  if (um == all.end() || um->second.values.size() != 8)
    throw FormatError("checkpoint: missing model config");
  const auto& uv = um->second.values;
  ckpt.unet = {as_size(uv[0]), as_size(uv[1]), as_size(uv[2]), as_size(uv[3]),
               {as_size(uv[4]), as_size(uv[5]), as_size(uv[6])}, uv[7] != 0.0f};
  if (auto am = all.find(kMetaAux); am != all.end()) {
    if (am->second.values.size() != 3) throw FormatError("checkpoint: malformed aux config");
    const auto& av = am->second.values;
    ckpt.aux = AuxHeadConfig{as_size(av[0]), as_size(av[1]), as_size(av[2])};
  }
  if (ckpt.fingerprint() != stored)
    throw FormatError("checkpoint: config fingerprint mismatch (stored " + fingerprint_hex(stored) +
                      ")");

  for (const auto& name : order) {
    if (name.rfind("meta.", 0) == 0 || name.rfind("adam.", 0) == 0) continue;
    const auto& t = all.at(name);
    ckpt.params[name] = Tensor(t.shape, std::vector<real>(t.values.begin(), t.values.end()), true);
  }
  if (auto ad = all.find(kMetaAdam); ad != all.end()) {
    const auto& v = ad->second.values;
    if (v.size() != 6) throw FormatError("checkpoint: malformed optimizer state");
    AdamState a;
    a.step_count = static_cast<std::uint64_t>(v[0]);
    a.lr = v[1];
    a.beta1 = v[2];
    a.beta2 = v[3];
    a.eps = v[4];
    if (v[5] != 0.0f) {
      for (const auto& [name, t] : ckpt.params) {
        const auto m = all.find("adam.m." + name);
        const auto s = all.find("adam.v." + name);
        if (m == all.end() || s == all.end() || m->second.shape != t.shape() ||
            s->second.shape != t.shape())
          throw FormatError("checkpoint: optimizer moments missing or misshaped for '" + name + "'");
        a.m.emplace_back(m->second.values.begin(), m->second.values.end());
        a.v.emplace_back(s->second.values.begin(), s->second.values.end());
      }
    }
    ckpt.adam = std::move(a);
  }

  // Shape agreement with the declared architecture.
  ParamStore expected = init_unet_params(ckpt.unet, 0);
  if (ckpt.aux)
    for (auto& [n, t] : init_aux_params(*ckpt.aux, 0)) expected[n] = t;
  for (const auto& [name, t] : ckpt.params) {
    const auto it = expected.find(name);
    if (it == expected.end()) throw FormatError("checkpoint: unexpected tensor '" + name + "'");
    if (it->second.shape() != t.shape())
      throw FormatError("checkpoint: tensor '" + name + "' has shape " + shape_str(t.shape()) +
                        ", config expects " + shape_str(it->second.shape()));
  }
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<unsigned char> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  try {
    return decode_checkpoint(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

ParamStore clone_params(const ParamStore& params) {
  ParamStore out;
  for (const auto& [name, t] : params) out[name] = t.clone();
  return out;
}

ParamStore transfer_encoder(const Checkpoint& pretrained, const UNetConfig& target,
                            std::uint64_t seed) {
  return transfer_encoder(pretrained, target, init_unet_params(target, seed));
}

ParamStore transfer_encoder(const Checkpoint& pretrained, const UNetConfig& target, ParamStore fresh) {
  const auto& src = pretrained.unet;
  std::string diffs;
  auto cmp = [&](const char* field, std::size_t a, std::size_t b) {
    if (a != b)
      diffs += std::string(diffs.empty() ? "" : ", ") + field + " (" + std::to_string(a) +
               " vs " + std::to_string(b) + ")";
  };
  cmp("depth", src.depth, target.depth);
  cmp("base_channels", src.base_channels, target.base_channels);
  cmp("in_channels", src.in_channels, target.in_channels);
  cmp("use_groupnorm", src.use_groupnorm, target.use_groupnorm);
  if (!diffs.empty()) throw TransferError("encoder config mismatch: " + diffs);

  std::size_t copied = 0;
  for (auto& [name, t] : fresh) {
    if (!is_encoder_param(name)) continue;
    const auto it = pretrained.params.find(name);
    if (it == pretrained.params.end())
      throw TransferError("pretrained checkpoint lacks encoder tensor '" + name + "'");
    if (it->second.shape() != t.shape())
      throw TransferError("encoder tensor '" + name + "' has shape " +
                          shape_str(it->second.shape()) + ", target expects " + shape_str(t.shape()));
    t = it->second.clone();
    t.set_requires_grad(true);
    ++copied;
  }
  if (copied == 0) throw TransferError("no encoder tensors found to transfer");
  return fresh;
}

}  // namespace neurotube
