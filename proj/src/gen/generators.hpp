#ifndef EQ_GEN_GENERATORS_HPP
#define EQ_GEN_GENERATORS_HPP

#include <cstdint>
#include <stdexcept>
#include <string>

#include "ir/ir.hpp"

namespace eq::gen {

struct GenError : std::runtime_error {
  explicit GenError(const std::string &msg) : std::runtime_error(msg) {}
};

// ── Convolution case study ──────────────────────────────────────────────────

enum class Dataflow { WS, IS, OS };

const char *dataflowName(Dataflow df);
Dataflow dataflowFromName(const std::string &name);

// Unit stride, no padding.
struct ConvConfig {
  uint64_t h = 0, w = 0;      // ifmap height/width
  uint64_t f_h = 0, f_w = 0;  // filter dims
  uint64_t c = 0;             // channels
  uint64_t n = 0;             // filter count
  uint64_t eH() const { return h - f_h + 1; }
  uint64_t eW() const { return w - f_w + 1; }
  void validate() const;  // throws GenError on zero output dims
};

struct ArrayConfig {
  uint64_t a_h = 0, a_w = 0;  // PE array height/width
  Dataflow dataflow = Dataflow::WS;
  void validate() const;
};

// The stationary dimension is flattened: the array tiles a D1 x D2 problem
// where each PE holds its stationary value for L consecutive steps.
//   WS: D1 = F_h*F_w*C, D2 = N,        L = E_h*E_w
//   IS: D1 = F_h*F_w*C, D2 = E_h*E_w,  L = N
//   OS: D1 = N,         D2 = F_h*F_w*C, L = E_h*E_w
struct SystolicDims {
  uint64_t d1 = 0, d2 = 0, l = 0;
};
SystolicDims systolicDims(const ConvConfig &conv, const ArrayConfig &arr);

// ceil(D1/A_h) * ceil(D2/A_w)
uint64_t loopIterations(const ConvConfig &conv, const ArrayConfig &arr);

// Fully scheduled systolic program: per tile, a stationary-load phase (one
// memcpy per used PE, serialized on the DMA) followed by lockstep wavefront
// steps of a read stage and a write stage, each fenced by a control_and
// barrier over the active PE launches.
ir::Program genSystolic(const ConvConfig &conv, const ArrayConfig &arr);

// Pipeline entry point: the same hardware structure plus the tiled, skewed
// loop nest in software form (for / parallel_for, abstract load/store on the
// SRAM buffers, comp_select PE references). The mapping passes lower it to
// the event-queue form. Linalg emits the coarse single-op surrogate instead.
enum class PipelineStage { Affine, Linalg };
ir::Program genSystolicPipelineInput(const ConvConfig &conv, const ArrayConfig &arr,
                                     PipelineStage stage = PipelineStage::Affine);

// ── FIR case study ──────────────────────────────────────────────────────────

// 4-lane vector units: one mul4/mac4 covers 2 taps across 4 output lanes, so
// a 4-output group costs taps/2 operation slots.
struct FirConfig {
  uint64_t taps = 32;
  uint64_t samples = 512;
  uint64_t sample_bits = 32;
  int fir_case = 1;          // 1..4
  uint64_t stream_bw = 4;    // bytes/cycle on the case-3/4 connections
  uint64_t cores() const;    // 1, 16, 16, 4
  uint64_t groups() const { return samples / 4; }
  void validate() const;
};

ir::Program genFir(const FirConfig &config);

}  // namespace eq::gen

#endif  // EQ_GEN_GENERATORS_HPP
