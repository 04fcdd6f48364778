#include "tng/embedding.hpp"

#include <chrono>
#include <cstring>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "tng/error.hpp"
#include "tng/rng.hpp"
#include "tng/util.hpp"

namespace tng {

namespace {

constexpr char kMagic[4] = {'T', 'N', 'G', 'E'};
constexpr std::uint32_t kVersion = 1;

void append_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void append_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void append_f64(std::string& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  append_u64(out, bits);
}

class Reader {
 public:
  Reader(const std::string& bytes, const std::string& file) : bytes_(bytes), file_(file) {}

  void raw(void* dst, std::size_t len) {
    if (pos_ + len > bytes_.size()) throw DataError(file_ + ": truncated embedding store");
    std::memcpy(dst, bytes_.data() + pos_, len);
    pos_ += len;
  }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    unsigned char b[4];
    raw(b, 4);
    for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v = 0;
    unsigned char b[8];
    raw(b, 8);
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
    return v;
  }
  double f64() {
    std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::string& bytes_;
  std::string file_;
  std::size_t pos_ = 0;
};

void append_record(std::string& out, std::uint8_t kind, const std::string& key,
                   const Vector& v) {
  out.push_back(static_cast<char>(kind));
  append_u32(out, static_cast<std::uint32_t>(key.size()));
  out += key;
  for (Index i = 0; i < v.size(); ++i) append_f64(out, v[i]);
}

}  // namespace

void EmbeddingStore::set_gene(const std::string& gene_id, const Vector& v) {
  if (v.size() != d_llm)
    throw DataError("embedding for gene '" + gene_id + "' has width " +
                    std::to_string(v.size()) + ", store expects " + std::to_string(d_llm));
  gene_vectors[gene_id] = v;
}

void EmbeddingStore::set_path(const std::string& path_id, const Vector& v) {
  if (v.size() != d_llm)
    throw DataError("embedding for path '" + path_id + "' has width " +
                    std::to_string(v.size()) + ", store expects " + std::to_string(d_llm));
  path_vectors[path_id] = v;
}

std::string describe_gene(const Gene& gene) {
  if (!gene.description.empty()) return gene.description;
  const std::string& symbol = gene.symbol.empty() ? gene.id : gene.symbol;
  return "Gene " + symbol + " (" + gene.id + ").";
}

std::string describe_path(const std::vector<int>& path, const GeneGraph& graph) {
  if (path.size() < 2) throw DataError("describe_path: path shorter than 2 nodes");
  auto role = [&](std::size_t i) -> std::string {
    if (i == 0) return "receptor gene";
    if (i + 1 == path.size()) return "target gene";
    return "signaling gene";
  };
  auto symbol = [&](std::size_t i) -> const std::string& {
    const Gene& g = graph.genes()[static_cast<std::size_t>(path[i])];
    return g.symbol.empty() ? g.id : g.symbol;
  };
  std::string text = "In this pathway: ";
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    if (i) text += ", ";
    text += role(i) + " " + symbol(i) + " connect to " + role(i + 1) + " " + symbol(i + 1);
  }
  text += ".";
  return text;
}

Vector mock_embed(std::string_view text, int d_llm, std::uint64_t seed) {
  if (d_llm < 1) throw DataError("mock_embed: d_llm must be at least 1");
  std::uint64_t h = fnv1a64(text.data(), text.size());
  h = fnv1a64(&seed, sizeof(seed), h);
  Rng rng(h);
  Vector v(d_llm);
  for (int i = 0; i < d_llm; ++i) v[i] = rng.normal();
  const double norm = v.norm();
  if (norm == 0.0) return mock_embed(text, d_llm, seed + 1);
  return v / norm;
}

void save_embedding_store(const EmbeddingStore& store, const std::string& file) {
  std::string out;
  out.append(kMagic, 4);
  append_u32(out, kVersion);
  append_u32(out, static_cast<std::uint32_t>(store.d_llm));
  append_u64(out, store.gene_vectors.size() + store.path_vectors.size());
  for (const auto& [key, v] : store.gene_vectors) append_record(out, 0, key, v);
  for (const auto& [key, v] : store.path_vectors) append_record(out, 1, key, v);
  write_file_atomic(file, out);
}

EmbeddingStore load_embedding_store(const std::string& file) {
  const std::string bytes = read_file(file);
  Reader reader(bytes, file);
  char magic[4];
  reader.raw(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0)
    throw DataError(file + ": not an embedding store (bad magic)");
  const std::uint32_t version = reader.u32();
  if (version != kVersion)
    throw DataError(file + ": unsupported store version " + std::to_string(version));
  EmbeddingStore store;
  store.d_llm = static_cast<int>(reader.u32());
  if (store.d_llm < 1) throw DataError(file + ": invalid d_llm");
  const std::uint64_t count = reader.u64();
  for (std::uint64_t r = 0; r < count; ++r) {
    std::uint8_t kind;
    reader.raw(&kind, 1);
    if (kind > 1) throw DataError(file + ": unknown record kind");
    const std::uint32_t key_len = reader.u32();
    std::string key(key_len, '\0');
    reader.raw(key.data(), key_len);
    Vector v(store.d_llm);
    for (int i = 0; i < store.d_llm; ++i) v[i] = reader.f64();
    auto& bucket = kind == 0 ? store.gene_vectors : store.path_vectors;
    if (!bucket.emplace(key, std::move(v)).second)
      throw DataError(file + ": duplicate key '" + key + "'");
  }
  if (!reader.done()) throw DataError(file + ": trailing bytes after last record");
  return store;
}

std::vector<Vector> fetch_embeddings(const EmbedClientConfig& config,
                                     const std::vector<std::string>& texts) {
  if (config.batch_size < 1) throw UsageError("fetch_embeddings: batch_size must be >= 1");
  if (texts.empty()) return {};

  // endpoint = http://host[:port][/path]
  std::string rest = config.endpoint;
  const std::string scheme = "http://";
  if (rest.rfind(scheme, 0) != 0)
    throw UsageError("fetch_embeddings: endpoint must start with http://");
  rest = rest.substr(scheme.size());
  std::string path = "/";
  if (const auto slash = rest.find('/'); slash != std::string::npos) {
    path = rest.substr(slash);
    rest = rest.substr(0, slash);
  }
  std::string host = rest;
  int port = 80;
  if (const auto colon = rest.find(':'); colon != std::string::npos) {
    host = rest.substr(0, colon);
    port = static_cast<int>(parse_long(rest.substr(colon + 1), "endpoint port"));
  }

  std::vector<Vector> result;
  result.reserve(texts.size());
  Index width = -1;
  for (std::size_t start = 0; start < texts.size(); start += config.batch_size) {
    const std::size_t end = std::min(texts.size(), start + config.batch_size);
    std::string body;
    for (std::size_t i = start; i < end; ++i) {
      if (i > start) body += '\n';
      body += texts[i];
    }
    const std::string batch_name =
        "batch " + std::to_string(start) + ".." + std::to_string(end - 1);

    std::string response;
    bool ok = false;
    std::string last_error;
    for (int attempt = 0; attempt <= config.retries; ++attempt) {
      if (attempt > 0)
        std::this_thread::sleep_for(std::chrono::milliseconds(50 << (attempt - 1)));
      httplib::Client client(host, port);
      client.set_connection_timeout(std::chrono::duration<double>(config.timeout_seconds));
      client.set_read_timeout(std::chrono::duration<double>(config.timeout_seconds));
      auto res = client.Post(path, body, "text/plain");
      if (!res) {
        last_error = "transport error (" + httplib::to_string(res.error()) + ")";
        continue;
      }
      if (res->status != 200) {
        last_error = "HTTP status " + std::to_string(res->status);
        continue;
      }
      response = res->body;
      ok = true;
      break;
    }
    if (!ok)
      throw DataError("fetch_embeddings: " + batch_name + " failed after " +
                      std::to_string(config.retries + 1) + " attempts: " + last_error);

    std::vector<std::string> lines;
    {
      std::istringstream stream(response);
      std::string line;
      while (std::getline(stream, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) lines.push_back(line);
      }
    }
    if (lines.size() != end - start)
      throw DataError("fetch_embeddings: " + batch_name + " returned " +
                      std::to_string(lines.size()) + " vectors for " +
                      std::to_string(end - start) + " texts");
    for (const std::string& line : lines) {
      const auto fields = split(line, ',');
      Vector v(static_cast<Index>(fields.size()));
      for (std::size_t i = 0; i < fields.size(); ++i)
        v[static_cast<Index>(i)] = parse_double(fields[i], "embedding response");
      if (width < 0) width = v.size();
      if (v.size() != width)
        throw DataError("fetch_embeddings: width mismatch in " + batch_name + " (got " +
                        std::to_string(v.size()) + ", expected " + std::to_string(width) + ")");
      result.push_back(std::move(v));
    }
  }
  return result;
}

}  // namespace tng
