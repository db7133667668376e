#include "frae/fast_coder.hpp"

#include <dlfcn.h>

#include <cstdlib>
#include <cstring>

#include "frae/error.hpp"

namespace {

int32_t status_of(const frae::BitstreamError& e) {
  return static_cast<int32_t>(e.kind()) + 1;
}

std::vector<frae::CdfTable> unflatten(const uint32_t* cdf_data,
                                      const size_t* cdf_offsets, size_t count) {
  std::vector<frae::CdfTable> tables(count);
  for (size_t i = 0; i < count; ++i) {
    tables[i].assign(cdf_data + cdf_offsets[i], cdf_data + cdf_offsets[i + 1]);
  }
  return tables;
}

int32_t emit(const std::vector<uint8_t>& bytes, uint8_t* out, size_t capacity,
             size_t* out_len) {
  *out_len = bytes.size();
  if (bytes.size() > capacity) return FRAE_FC_ERR_CAPACITY;
  if (!bytes.empty()) std::memcpy(out, bytes.data(), bytes.size());
  return FRAE_FC_OK;
}

}  // namespace

extern "C" {

uint32_t frae_ref_abi_version(void) { return FRAE_FC_ABI_VERSION; }

int32_t frae_ref_encode(const uint32_t* symbols, size_t count,
                        const uint32_t* cdf_data, const size_t* cdf_offsets,
                        uint8_t* out, size_t capacity, size_t* out_len) {
  if (!out_len || (count > 0 && (!symbols || !cdf_data || !cdf_offsets))) {
    return FRAE_FC_ERR_ARGUMENT;
  }
  try {
    frae::SymbolStream s;
    s.symbols.assign(symbols, symbols + count);
    s.tables = unflatten(cdf_data, cdf_offsets, count);
    return emit(frae::ac_encode(s), out, capacity, out_len);
  } catch (const frae::BitstreamError& e) {
    return status_of(e);
  } catch (...) {
    return FRAE_FC_ERR_ARGUMENT;
  }
}

int32_t frae_ref_decode(const uint8_t* payload, size_t len,
                        const uint32_t* cdf_data, const size_t* cdf_offsets,
                        size_t count, uint32_t* symbols) {
  if ((len > 0 && !payload) || (count > 0 && (!cdf_data || !cdf_offsets || !symbols))) {
    return FRAE_FC_ERR_ARGUMENT;
  }
  try {
    const auto tables = unflatten(cdf_data, cdf_offsets, count);
    const auto decoded = frae::ac_decode({payload, len}, tables, count);
    std::copy(decoded.begin(), decoded.end(), symbols);
    return FRAE_FC_OK;
  } catch (const frae::BitstreamError& e) {
    return status_of(e);
  } catch (...) {
    return FRAE_FC_ERR_ARGUMENT;
  }
}

int32_t frae_ref_write_gop(const uint32_t* header, const uint8_t* frame_types,
                           const uint16_t* latent_dims,
                           const uint8_t* payload_data,
                           const size_t* payload_offsets, uint8_t* out,
                           size_t capacity, size_t* out_len) {
  if (!header || !out_len) return FRAE_FC_ERR_ARGUMENT;
  try {
    frae::GopBitstream gop;
    if (header[0] > 0xFF || header[1] > 0xFFFF || header[2] > 0xFFFF ||
        header[3] > 0xFF || header[4] > 0xFF || header[5] > 0xFF) {
      return FRAE_FC_ERR_FIELD;
    }
    gop.header.version = static_cast<uint8_t>(header[0]);
    gop.header.width = static_cast<uint16_t>(header[1]);
    gop.header.height = static_cast<uint16_t>(header[2]);
    gop.header.gop_size = static_cast<uint8_t>(header[3]);
    gop.header.frame_count = header[4];
    gop.header.codebook_size = static_cast<uint8_t>(header[5]);
    for (uint32_t i = 0; i < header[4]; ++i) {
      frae::FrameRecord f;
      if (frame_types[i] > 1) return FRAE_FC_ERR_FIELD;
      f.type = static_cast<frae::FrameType>(frame_types[i]);
      f.latent_height = latent_dims[3 * i];
      f.latent_width = latent_dims[3 * i + 1];
      f.latent_channels = latent_dims[3 * i + 2];
      f.payload.assign(payload_data + payload_offsets[i], payload_data + payload_offsets[i + 1]);
      gop.frames.push_back(std::move(f));
    }
    return emit(frae::write_gop(gop), out, capacity, out_len);
  } catch (const frae::BitstreamError& e) {
    return status_of(e);
  } catch (...) {
    return FRAE_FC_ERR_ARGUMENT;
  }
}

int32_t frae_ref_read_gop(const uint8_t* bytes, size_t len, uint32_t* header,
                          uint8_t* frame_types, uint16_t* latent_dims,
                          size_t* payload_starts, size_t* payload_lengths,
                          size_t* consumed) {
  if (!bytes || !header || !frame_types || !latent_dims || !payload_starts ||
      !payload_lengths || !consumed) {
    return FRAE_FC_ERR_ARGUMENT;
  }
  try {
    const frae::GopBitstream gop = frae::read_gop({bytes, len}, consumed);
    header[0] = gop.header.version;
    header[1] = gop.header.width;
    header[2] = gop.header.height;
    header[3] = gop.header.gop_size;
    header[4] = gop.header.frame_count;
    header[5] = gop.header.codebook_size;
    size_t offset = frae::kHeaderBytes;
    for (size_t i = 0; i < gop.frames.size(); ++i) {
      const frae::FrameRecord& f = gop.frames[i];
      frame_types[i] = static_cast<uint8_t>(f.type);
      latent_dims[3 * i] = f.latent_height;
      latent_dims[3 * i + 1] = f.latent_width;
      latent_dims[3 * i + 2] = f.latent_channels;
      offset += frae::kRecordHeaderBytes;
      payload_starts[i] = offset;
      payload_lengths[i] = f.payload.size();
      offset += f.payload.size();
    }
    return FRAE_FC_OK;
  } catch (const frae::BitstreamError& e) {
    return status_of(e);
  } catch (...) {
    return FRAE_FC_ERR_ARGUMENT;
  }
}

}  // extern "C"

namespace frae {

namespace {

[[noreturn]] void raise(int32_t status, const char* op) {
  if (status >= 1 && status <= 8) {
    throw BitstreamError(static_cast<BitstreamErrorKind>(status - 1),
                         std::string(op) + " failed across the coder interface");
  }
  throw InvalidArgument(std::string(op) + " rejected its arguments (status " +
                        std::to_string(status) + ")");
}

struct FlatTables {
  std::vector<uint32_t> data;
  std::vector<size_t> offsets{0};
};

FlatTables flatten(std::span<const CdfTable> tables) {
  FlatTables f;
  for (const CdfTable& t : tables) {
    f.data.insert(f.data.end(), t.begin(), t.end());
    f.offsets.push_back(f.data.size());
  }
  return f;
}

}  // namespace

CoderBackend CoderBackend::reference() {
  CoderBackend b;
  b.fn_ = {frae_ref_abi_version, frae_ref_encode, frae_ref_decode,
           frae_ref_write_gop, frae_ref_read_gop};
  b.description_ = "reference";
  return b;
}

CoderBackend CoderBackend::probe(const std::filesystem::path& library) {
  std::string path = library.string();
  if (path.empty()) {
    const char* env = std::getenv("FRAE_FAST_CODER");
    path = env && *env ? env : kFastCoderLibrary;
  }
  CoderBackend fallback = reference();
  void* handle = dlopen(path.c_str(), RTLD_NOW | RTLD_LOCAL);
  if (!handle) {
    const char* err = dlerror();
    fallback.reason_ = "accelerated coder unavailable: " + std::string(err ? err : path);
    return fallback;
  }
  std::shared_ptr<void> owner(handle, [](void* h) { dlclose(h); });
  Functions fn{};
  fn.abi_version = reinterpret_cast<frae_fc_abi_version_fn>(dlsym(handle, "frae_fc_abi_version"));
  fn.encode = reinterpret_cast<frae_fc_encode_fn>(dlsym(handle, "frae_fc_encode"));
  fn.decode = reinterpret_cast<frae_fc_decode_fn>(dlsym(handle, "frae_fc_decode"));
  fn.write_gop = reinterpret_cast<frae_fc_write_gop_fn>(dlsym(handle, "frae_fc_write_gop"));
  fn.read_gop = reinterpret_cast<frae_fc_read_gop_fn>(dlsym(handle, "frae_fc_read_gop"));
  if (!fn.abi_version || !fn.encode || !fn.decode || !fn.write_gop || !fn.read_gop) {
    fallback.reason_ = "'" + path + "' lacks required coder symbols";
    return fallback;
  }
  if (fn.abi_version() != FRAE_FC_ABI_VERSION) {
    fallback.reason_ = "'" + path + "' implements coder ABI " +
                       std::to_string(fn.abi_version()) + ", expected " +
                       std::to_string(FRAE_FC_ABI_VERSION);
    return fallback;
  }
  CoderBackend b;
  b.fn_ = fn;
  b.handle_ = std::move(owner);
  b.description_ = "accelerated (" + path + ")";
  return b;
}

std::vector<std::uint8_t> CoderBackend::encode(const SymbolStream& stream) const {
  if (stream.symbols.size() != stream.tables.size()) {
    throw InvalidArgument("encode: one table per symbol is required");
  }
  const FlatTables t = flatten(stream.tables);
  std::size_t capacity = 64 + 4 * stream.symbols.size();
  std::vector<std::uint8_t> out(capacity);
  std::size_t len = 0;
  int32_t status = fn_.encode(stream.symbols.data(), stream.symbols.size(), t.data.data(),
                              t.offsets.data(), out.data(), capacity, &len);
  if (status == FRAE_FC_ERR_CAPACITY) {
    out.resize(len);
    status = fn_.encode(stream.symbols.data(), stream.symbols.size(), t.data.data(),
                        t.offsets.data(), out.data(), len, &len);
  }
  if (status != FRAE_FC_OK) raise(status, "encode");
  out.resize(len);
  return out;
}

std::vector<std::uint32_t> CoderBackend::decode(std::span<const std::uint8_t> payload,
                                                std::span<const CdfTable> tables,
                                                std::size_t count) const {
  if (tables.size() != count) throw InvalidArgument("decode: one table per symbol is required");
  const FlatTables t = flatten(tables);
  std::vector<std::uint32_t> symbols(count);
  const int32_t status = fn_.decode(payload.data(), payload.size(), t.data.data(),
                                    t.offsets.data(), count, symbols.data());
  if (status != FRAE_FC_OK) raise(status, "decode");
  return symbols;
}

std::vector<std::uint8_t> CoderBackend::write_gop(const GopBitstream& gop) const {
  const std::uint32_t header[FRAE_FC_HEADER_FIELDS] = {
      gop.header.version, gop.header.width, gop.header.height,
      gop.header.gop_size, gop.header.frame_count, gop.header.codebook_size};
  if (gop.frames.size() != gop.header.frame_count) {
    throw BitstreamError(BitstreamErrorKind::kLengthMismatch,
                         "header frame count disagrees with the record list");
  }
  std::vector<std::uint8_t> types;
  std::vector<std::uint16_t> dims;
  std::vector<std::uint8_t> data;
  std::vector<std::size_t> offsets{0};
  for (const FrameRecord& f : gop.frames) {
    types.push_back(static_cast<std::uint8_t>(f.type));
    dims.insert(dims.end(), {f.latent_height, f.latent_width, f.latent_channels});
    data.insert(data.end(), f.payload.begin(), f.payload.end());
    offsets.push_back(data.size());
  }
  std::size_t capacity = kHeaderBytes + gop.frames.size() * kRecordHeaderBytes + data.size();
  std::vector<std::uint8_t> out(capacity);
  std::size_t len = 0;
  const int32_t status = fn_.write_gop(header, types.data(), dims.data(), data.data(),
                                       offsets.data(), out.data(), capacity, &len);
  if (status != FRAE_FC_OK) raise(status, "write_gop");
  out.resize(len);
  return out;
}

GopBitstream CoderBackend::read_gop(std::span<const std::uint8_t> bytes,
                                    std::size_t* consumed) const {
  std::uint32_t header[FRAE_FC_HEADER_FIELDS];
  std::uint8_t types[255];
  std::uint16_t dims[3 * 255];
  std::size_t starts[255];
  std::size_t lengths[255];
  std::size_t used = 0;
  const int32_t status = fn_.read_gop(bytes.data(), bytes.size(), header, types, dims,
                                      starts, lengths, &used);
  if (status != FRAE_FC_OK) raise(status, "read_gop");
  GopBitstream gop;
  gop.header.version = static_cast<std::uint8_t>(header[0]);
  gop.header.width = static_cast<std::uint16_t>(header[1]);
  gop.header.height = static_cast<std::uint16_t>(header[2]);
  gop.header.gop_size = static_cast<std::uint8_t>(header[3]);
  gop.header.frame_count = header[4];
  gop.header.codebook_size = static_cast<std::uint8_t>(header[5]);
  for (std::uint32_t i = 0; i < header[4]; ++i) {
    FrameRecord f;
    f.type = static_cast<FrameType>(types[i]);
    f.latent_height = dims[3 * i];
    f.latent_width = dims[3 * i + 1];
    f.latent_channels = dims[3 * i + 2];
    f.payload.assign(bytes.begin() + starts[i], bytes.begin() + starts[i] + lengths[i]);
    gop.frames.push_back(std::move(f));
  }
  if (consumed) *consumed = used;
  return gop;
}

}  // namespace frae
