/* Stand-in for an accelerated coder: forwards to the reference entry points
 * exported by the test executable and counts calls. */
#include "frae/fast_coder_abi.h"

#ifndef STUB_ABI_VERSION
#define STUB_ABI_VERSION FRAE_FC_ABI_VERSION
#endif

extern "C" {

static unsigned long calls;

unsigned long frae_stub_calls(void) { return calls; }

uint32_t frae_fc_abi_version(void) { return STUB_ABI_VERSION; }

int32_t frae_fc_encode(const uint32_t* symbols, size_t count, const uint32_t* cdf_data,
                       const size_t* cdf_offsets, uint8_t* out, size_t capacity,
                       size_t* out_len) {
  ++calls;
  return frae_ref_encode(symbols, count, cdf_data, cdf_offsets, out, capacity, out_len);
}

int32_t frae_fc_decode(const uint8_t* payload, size_t len, const uint32_t* cdf_data,
                       const size_t* cdf_offsets, size_t count, uint32_t* symbols) {
  ++calls;
  return frae_ref_decode(payload, len, cdf_data, cdf_offsets, count, symbols);
}

#ifndef STUB_PARTIAL
int32_t frae_fc_write_gop(const uint32_t* header, const uint8_t* frame_types,
                          const uint16_t* latent_dims, const uint8_t* payload_data,
                          const size_t* payload_offsets, uint8_t* out, size_t capacity,
                          size_t* out_len) {
  ++calls;
  return frae_ref_write_gop(header, frame_types, latent_dims, payload_data, payload_offsets,
                            out, capacity, out_len);
}

int32_t frae_fc_read_gop(const uint8_t* bytes, size_t len, uint32_t* header,
                         uint8_t* frame_types, uint16_t* latent_dims, size_t* payload_starts,
                         size_t* payload_lengths, size_t* consumed) {
  ++calls;
  return frae_ref_read_gop(bytes, len, header, frame_types, latent_dims, payload_starts,
                           payload_lengths, consumed);
}
#endif

}  // extern "C"
