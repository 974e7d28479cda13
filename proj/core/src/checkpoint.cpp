#include "tea/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>

#include "tea/rng.hpp"

namespace tea {

namespace {

constexpr char kMagic[4] = {'T', 'E', 'A', 'W'};

void put_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u64(std::string& buf, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

struct Reader {
  const std::string& buf;
  std::size_t pos = 0;
  void need(std::size_t n) const {
    if (pos + n > buf.size())
      throw TruncatedFileError("checkpoint: file ends " + std::to_string(pos + n - buf.size()) +
                               " bytes early");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
    pos += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
    pos += 8;
    return v;
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
};

}  // namespace

void save_checkpoint(const std::string& path, Network& net) {
  const std::string spec_json = net.spec.to_json_string(-1);
  auto named = net.named_params();
  auto buffers = net.named_buffers();

  // digest over every parameter's and buffer's raw bytes, file order
  std::uint64_t payload = 0xcbf29ce484222325ULL;
  for (auto& [name, p] : named)
    payload = fnv1a64(p->data->data(), p->data->size() * sizeof(float), payload);
  for (auto& [name, b] : buffers) payload = fnv1a64(b->data(), b->size() * sizeof(float), payload);

  std::string buf;
  buf.append(kMagic, 4);
  put_u32(buf, kCheckpointVersion);
  put_u64(buf, net.spec.digest());
  put_u64(buf, payload);
  put_u32(buf, static_cast<std::uint32_t>(spec_json.size()));
  buf.append(spec_json);
  put_u32(buf, static_cast<std::uint32_t>(named.size()));
  for (auto& [name, p] : named) {
    put_u32(buf, static_cast<std::uint32_t>(name.size()));
    buf.append(name);
    put_u32(buf, static_cast<std::uint32_t>(p->shape.size()));
    for (int d : p->shape) put_u32(buf, static_cast<std::uint32_t>(d));
    buf.append(reinterpret_cast<const char*>(p->data->data()),
               p->data->size() * sizeof(float));
  }
  put_u32(buf, static_cast<std::uint32_t>(buffers.size()));
  for (auto& [name, b] : buffers) {
    put_u32(buf, static_cast<std::uint32_t>(name.size()));
    buf.append(name);
    put_u32(buf, static_cast<std::uint32_t>(b->size()));
    buf.append(reinterpret_cast<const char*>(b->data()), b->size() * sizeof(float));
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("checkpoint: cannot open '" + path + "' for writing");
  f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!f) throw IoError("checkpoint: short write to '" + path + "'");
}

Network load_checkpoint(const std::string& path, const std::optional<NetworkSpec>& expect) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("checkpoint: cannot open '" + path + "'");
  std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  Reader r{buf};

  const std::string magic = r.bytes(4);
  if (std::memcmp(magic.data(), kMagic, 4) != 0)
    throw BadMagicError("checkpoint: bad magic in '" + path + "'");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    throw VersionError("checkpoint: unsupported version " + std::to_string(version));
  const std::uint64_t stored_spec_digest = r.u64();
  const std::uint64_t stored_payload = r.u64();
  const std::uint32_t spec_len = r.u32();
  const std::string spec_json = r.bytes(spec_len);

  NetworkSpec spec = NetworkSpec::from_json_string(spec_json);
  if (spec.digest() != stored_spec_digest)
    throw DigestError("checkpoint: stored spec digest does not match embedded spec");
  if (expect && expect->digest() != stored_spec_digest)
    throw DigestError("checkpoint: trained for spec '" + spec.name +
                      "', caller expected '" + expect->name + "'");

  const std::uint32_t n_params = r.u32();
  std::map<std::string, std::pair<Shape, std::vector<float>>> stored;
  std::uint64_t payload = 0xcbf29ce484222325ULL;
  std::vector<std::string> order;
  for (std::uint32_t i = 0; i < n_params; ++i) {
    const std::uint32_t name_len = r.u32();
    const std::string name = r.bytes(name_len);
    const std::uint32_t ndim = r.u32();
    Shape shape;
    std::int64_t count = 1;
    for (std::uint32_t d = 0; d < ndim; ++d) {
      shape.push_back(static_cast<int>(r.u32()));
      count *= shape.back();
    }
    const std::string raw = r.bytes(static_cast<std::size_t>(count) * sizeof(float));
    payload = fnv1a64(raw.data(), raw.size(), payload);
    std::vector<float> vals(static_cast<std::size_t>(count));
    std::memcpy(vals.data(), raw.data(), raw.size());
    stored.emplace(name, std::make_pair(std::move(shape), std::move(vals)));
    order.push_back(name);
  }
  const std::uint32_t n_buffers = r.u32();
  std::map<std::string, std::vector<float>> stored_buf;
  for (std::uint32_t i = 0; i < n_buffers; ++i) {
    const std::uint32_t name_len = r.u32();
    const std::string name = r.bytes(name_len);
    const std::uint32_t count = r.u32();
    const std::string raw = r.bytes(static_cast<std::size_t>(count) * sizeof(float));
    payload = fnv1a64(raw.data(), raw.size(), payload);
    std::vector<float> vals(count);
    std::memcpy(vals.data(), raw.data(), raw.size());
    stored_buf.emplace(name, std::move(vals));
  }
  if (payload != stored_payload)
    throw DigestError("checkpoint: parameter payload digest mismatch (corrupt data)");

  Network net = build_network(spec, /*seed=*/0);
  auto named = net.named_params();
  if (named.size() != stored.size())
    throw DigestError("checkpoint: parameter count mismatch for spec '" + spec.name + "'");
  for (auto& [name, p] : named) {
    auto it = stored.find(name);
    if (it == stored.end())
      throw DigestError("checkpoint: missing parameter '" + name + "'");
    if (it->second.first != p->shape)
      throw DigestError("checkpoint: shape mismatch for '" + name + "'");
    std::copy(it->second.second.begin(), it->second.second.end(), p->data->begin());
  }
  auto buffers = net.named_buffers();
  if (buffers.size() != stored_buf.size())
    throw DigestError("checkpoint: buffer count mismatch for spec '" + spec.name + "'");
  for (auto& [name, b] : buffers) {
    auto it = stored_buf.find(name);
    if (it == stored_buf.end()) throw DigestError("checkpoint: missing buffer '" + name + "'");
    if (it->second.size() != b->size())
      throw DigestError("checkpoint: buffer size mismatch for '" + name + "'");
    *b = it->second;
  }
  return net;
}

}  // namespace tea
