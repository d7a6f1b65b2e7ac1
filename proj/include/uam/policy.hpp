#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "uam/action.hpp"
#include "uam/mdp.hpp"
#include "uam/random.hpp"

namespace uam {

// Own state: z, changing, z_target, one-hot previous action.
inline constexpr std::size_t kOwnFeatures = 6;
// Intruder: relative altitude, distance, one-hot previous action.
inline constexpr std::size_t kIntruderFeatures = 5;

// Offsets of each weight tensor inside the flat parameter vector. Matrices
// are row-major [out x in].
struct PolicyLayout {
  std::size_t hidden = 0;
  std::size_t own_w1 = 0, own_b1 = 0, own_w2 = 0, own_b2 = 0;
  std::size_t int_w1 = 0, int_b1 = 0, int_w2 = 0, int_b2 = 0;
  std::size_t att_q = 0, att_k = 0, att_v = 0;
  std::size_t trunk_w = 0, trunk_b = 0;
  std::size_t pi_w = 0, pi_b = 0;
  std::size_t v_w = 0, v_b = 0;
  std::size_t total = 0;

  explicit PolicyLayout(std::size_t hidden_width = 0);
};

// Shared actor-critic weights: two-layer tanh encoders for the own state and
// for each intruder, single-head dot-product attention pooling the intruder
// embeddings with a query from the own embedding, a tanh trunk, and policy
// (3 logits) and value heads.
class PolicyParams {
 public:
  PolicyParams() = default;
  explicit PolicyParams(std::size_t hidden);  // all zeros

  // Glorot-uniform weights, zero biases, near-uniform initial policy.
  static PolicyParams initialize(std::size_t hidden, std::uint64_t seed);

  std::size_t hidden() const { return layout_.hidden; }
  const PolicyLayout& layout() const { return layout_; }
  std::size_t size() const { return values_.size(); }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  friend bool operator==(const PolicyParams& a, const PolicyParams& b) { return a.values_ == b.values_; }

 private:
  PolicyLayout layout_;
  std::vector<double> values_;
};

struct PolicyOutput {
  std::array<double, kNumActions> logits{};     // masked entries are -inf
  std::array<double, kNumActions> probs{};      // masked entries are 0
  std::array<double, kNumActions> log_probs{};  // masked entries are -inf
  double value = 0.0;
};

// Activations kept from the last forward pass, reused across calls.
struct PolicyWorkspace {
  std::array<double, kOwnFeatures> own_x{};
  std::vector<double> own_h1, own_e;
  std::vector<double> int_x, int_h1, int_u;  // [n x F], [n x H], [n x H]
  std::vector<double> keys, vals;            // [n x H]
  std::vector<double> query, scores, alpha, pooled;
  std::vector<double> concat, trunk;
  std::size_t n_intruders = 0;
  ActionMask mask{};
  PolicyOutput out;
};

void encode_own(const OwnObservation& own, std::span<double, kOwnFeatures> x);
void encode_intruder(const IntruderObservation& in, std::span<double, kIntruderFeatures> x);

// Throws ContractError if the mask allows nothing.
PolicyOutput policy_forward(const PolicyParams& params, const Observation& obs, const ActionMask& mask);
const PolicyOutput& policy_forward(const PolicyParams& params, const Observation& obs,
                                   const ActionMask& mask, PolicyWorkspace& ws);

// Backpropagates dL/dlogits and dL/dvalue through the pass cached in ws,
// adding into grad (same layout as params).
void policy_backward(const PolicyParams& params, const PolicyWorkspace& ws,
                     const std::array<double, kNumActions>& d_logits, double d_value,
                     std::span<double> grad);

struct SampledAction {
  Action action = Action::Hold;
  double log_prob = 0.0;
};

// Categorical draw over the output distribution.
SampledAction sample_action(const PolicyOutput& dist, Rng& rng);
// Most probable action; ties go to the lowest index.
SampledAction greedy_action(const PolicyOutput& dist);

}  // namespace uam
