#ifndef HCCTC_CTC_CTC_HPP_
#define HCCTC_CTC_CTC_HPP_

#include <span>
#include <vector>

#include "hcctc/numerics/tensor.hpp"

namespace hcctc::ctc {

/// The blank symbol shares id 0 with the vocabulary's reserved blank.
inline constexpr int kBlank = 0;

/// log(exp(a) + exp(b)) with -inf handled as the additive identity.
double log_add(double a, double b);

/// Merges adjacent duplicates, then drops blanks.
std::vector<int> collapse(std::span<const int> path);

/// Fewest frames that can emit `target`: one per label plus one blank between
/// each pair of equal neighbours.
int min_frames(std::span<const int> target);
inline bool is_feasible(std::span<const int> target, int frames) { return min_frames(target) <= frames; }

/// Blank-interleaved label sequence (blank, y1, blank, ..., yL, blank).
std::vector<int> expand_with_blanks(std::span<const int> target);

/// Forward/backward tables over the expanded label sequence, all in log
/// space. beta includes the emission at its own frame, so for any t
///   log P = logsumexp_s(alpha(t,s) + beta(t,s) - log_probs(t, expanded[s])).
struct Lattice {
  std::vector<int> expanded;
  Matrix<double> alpha;
  Matrix<double> beta;
  double log_likelihood = 0.0;
};

Lattice build_lattice(const Matrix<double>& log_probs, std::span<const int> target);

struct LossResult {
  double loss = 0.0;  // +inf when infeasible
  bool feasible = true;
  Matrix<double> grad;  // d loss / d log_probs; zero when infeasible
};

/// Negative log-likelihood of `target` under per-frame log-posteriors
/// (T x V, blank at column 0), with its exact gradient w.r.t. the log-posteriors.
LossResult ctc_loss(const Matrix<double>& log_probs, std::span<const int> target);

/// Sums prod_t probs(t, z_t) over every latent path z with collapse(z) == target
/// by explicit enumeration. Limited to T <= 8 and V^T <= 1e6.
double brute_force_ctc(const Matrix<double>& probs, std::span<const int> target);

/// Per-frame argmax (lowest id wins ties) followed by collapse.
std::vector<int> best_path_decode(const Matrix<double>& posteriors);

template <typename S>
std::vector<int> best_path_decode(const Matrix<S>& posteriors) {
  return best_path_decode(Matrix<double>(posteriors.template cast<double>()));
}

}  // namespace hcctc::ctc

#endif  // HCCTC_CTC_CTC_HPP_
