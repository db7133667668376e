/* Flat C interface shared by the reference coder and accelerated drop-in
 * libraries. Only integer and byte buffers cross the boundary. */
#ifndef FRAE_FAST_CODER_ABI_H
#define FRAE_FAST_CODER_ABI_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#define FRAE_FC_ABI_VERSION 1u

/* Status codes. Values 1..8 mirror the bitstream error kinds in order:
 * bad magic, version mismatch, length mismatch, invalid field, payload
 * exhausted, corrupt payload, zero probability, invalid table. */
enum {
  FRAE_FC_OK = 0,
  FRAE_FC_ERR_BAD_MAGIC = 1,
  FRAE_FC_ERR_VERSION = 2,
  FRAE_FC_ERR_LENGTH = 3,
  FRAE_FC_ERR_FIELD = 4,
  FRAE_FC_ERR_EXHAUSTED = 5,
  FRAE_FC_ERR_CORRUPT = 6,
  FRAE_FC_ERR_ZERO_PROBABILITY = 7,
  FRAE_FC_ERR_TABLE = 8,
  FRAE_FC_ERR_CAPACITY = 64, /* output buffer too small; *out_len holds the need */
  FRAE_FC_ERR_ARGUMENT = 65
};

/* Header fields, in this order: version, width, height, gop_size,
 * frame_count, codebook_size. */
#define FRAE_FC_HEADER_FIELDS 6

/* Symbol tables: table i is cdf_data[cdf_offsets[i] .. cdf_offsets[i+1]). */
typedef uint32_t (*frae_fc_abi_version_fn)(void);
typedef int32_t (*frae_fc_encode_fn)(const uint32_t* symbols, size_t count,
                                     const uint32_t* cdf_data,
                                     const size_t* cdf_offsets, uint8_t* out,
                                     size_t capacity, size_t* out_len);
typedef int32_t (*frae_fc_decode_fn)(const uint8_t* payload, size_t len,
                                     const uint32_t* cdf_data,
                                     const size_t* cdf_offsets, size_t count,
                                     uint32_t* symbols);
/* Records: frame_types[i]; latent_dims[3i..3i+2] = (height, width,
 * channels); payload i is payload_data[payload_offsets[i] ..
 * payload_offsets[i+1]). */
typedef int32_t (*frae_fc_write_gop_fn)(const uint32_t* header,
                                        const uint8_t* frame_types,
                                        const uint16_t* latent_dims,
                                        const uint8_t* payload_data,
                                        const size_t* payload_offsets,
                                        uint8_t* out, size_t capacity,
                                        size_t* out_len);
/* Output arrays hold room for 255 frames. Payload i is
 * bytes[payload_starts[i] .. payload_starts[i] + payload_lengths[i]). */
typedef int32_t (*frae_fc_read_gop_fn)(const uint8_t* bytes, size_t len,
                                       uint32_t* header, uint8_t* frame_types,
                                       uint16_t* latent_dims,
                                       size_t* payload_starts,
                                       size_t* payload_lengths,
                                       size_t* consumed);

/* Reference implementations, exported by the primary library under their
 * own names so that an accelerated library can be loaded alongside. */
uint32_t frae_ref_abi_version(void);
int32_t frae_ref_encode(const uint32_t* symbols, size_t count,
                        const uint32_t* cdf_data, const size_t* cdf_offsets,
                        uint8_t* out, size_t capacity, size_t* out_len);
int32_t frae_ref_decode(const uint8_t* payload, size_t len,
                        const uint32_t* cdf_data, const size_t* cdf_offsets,
                        size_t count, uint32_t* symbols);
int32_t frae_ref_write_gop(const uint32_t* header, const uint8_t* frame_types,
                           const uint16_t* latent_dims,
                           const uint8_t* payload_data,
                           const size_t* payload_offsets, uint8_t* out,
                           size_t capacity, size_t* out_len);
int32_t frae_ref_read_gop(const uint8_t* bytes, size_t len, uint32_t* header,
                          uint8_t* frame_types, uint16_t* latent_dims,
                          size_t* payload_starts, size_t* payload_lengths,
                          size_t* consumed);

#ifdef __cplusplus
}
#endif

#endif
