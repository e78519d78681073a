#pragma once

// Dependent-site target model.
//
// The rate of substituting b at site i is the ISM rate times a context
// multiplier that sees the proposed base and a window of k/2 neighbours on
// each side of i. Neighbours that fall off either end of the sequence are
// passed as kAbsent.

#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "dsmis/ism.hpp"
#include "dsmis/seqcore.hpp"

namespace dsmis {

class ContextModel {
 public:
  static constexpr int kAbsent = -1;
  // window has k + 1 entries, window[k / 2] is the current base of the site.
  using Multiplier = std::function<double(Base proposed, std::span<const int> window)>;

  // k must be even. Outputs are checked against [phi_min, phi_max]:
  // exhaustively when the (window, base) space has at most 1e6 entries (the
  // multiplier is then tabulated), by random probing otherwise.
  ContextModel(std::size_t alphabet_size, std::size_t k, Multiplier multiplier, double phi_min,
               double phi_max);

  // k = 0, multiplier identically 1.
  static ContextModel independent(std::size_t alphabet_size = 4);

  std::size_t alphabet_size() const { return a_; }
  std::size_t k() const { return k_; }
  std::size_t half_width() const { return k_ / 2; }
  double phi_min() const { return phi_min_; }
  double phi_max() const { return phi_max_; }
  double phi_star() const { return phi_max_ / phi_min_; }
  bool tabulated() const { return !table_.empty(); }

  double multiplier(Base proposed, std::span<const int> window) const;

  // Multiplier for substituting `proposed` at site i of `state`.
  double at(std::span<const Base> state, std::size_t i, Base proposed) const {
    if (tabulated()) return table_[window_code(state, i) * a_ + proposed];
    return at_slow(state, i, proposed);
  }

  // Tabulated models only.
  std::size_t window_code(std::span<const Base> state, std::size_t i) const {
    const std::size_t h = k_ / 2;
    const std::size_t n = state.size();
    std::size_t code = 0;
    std::size_t scale = 1;
    for (std::size_t j = 0; j <= k_; ++j, scale *= a_ + 1) {
      const std::size_t pos = i + j;  // i - h + j, shifted to stay unsigned
      if (pos >= h && pos - h < n) code += scale * (state[pos - h] + 1u);
    }
    return code;
  }
  double table_entry(std::size_t code, Base proposed) const { return table_[code * a_ + proposed]; }

 private:
  double at_slow(std::span<const Base> state, std::size_t i, Base proposed) const;
  void check_value(double v) const;

  std::size_t a_;
  std::size_t k_;
  Multiplier fn_;
  double phi_min_;
  double phi_max_;
  std::vector<double> table_;
};

class DsmModel {
 public:
  DsmModel(IsmModel ism, ContextModel context);

  const IsmModel& ism() const { return ism_; }
  const ContextModel& context() const { return context_; }
  std::size_t alphabet_size() const { return ism_.alphabet_size(); }

  // Per-site generator coverage and k + 1 <= n.
  void check_length(std::size_t n) const;

  double site_rate(std::span<const Base> state, std::size_t i, Base proposed) const {
    return ism_.generator(i).rate(state[i], proposed) * context_.at(state, i, proposed);
  }

  // sum_{b != state[i]} site_rate(state, i, b), in index order.
  template <class Scalar = double>
  Scalar site_exit_rate(std::span<const Base> state, std::size_t i) const {
    const SiteGenerator& g = ism_.generator(i);
    const Base x = state[i];
    const std::size_t a = alphabet_size();
    Scalar out = 0;
    if (context_.tabulated()) {
      const std::size_t code = context_.window_code(state, i);
      for (std::size_t b = 0; b < a; ++b) {
        if (b == x) continue;
        out += Scalar(g.rate(x, static_cast<Base>(b))) *
               Scalar(context_.table_entry(code, static_cast<Base>(b)));
      }
    } else {
      for (std::size_t b = 0; b < a; ++b) {
        if (b == x) continue;
        out += Scalar(g.rate(x, static_cast<Base>(b))) *
               Scalar(context_.at(state, i, static_cast<Base>(b)));
      }
    }
    return out;
  }

 private:
  IsmModel ism_;
  ContextModel context_;
};

// phi(b; window of site i). Throws std::invalid_argument if b == seq[i].
double context_multiplier(const DsmModel& model, const Sequence& seq, std::size_t i, Base b);

// Full scan: sum over sites of the DSM exit rate.
double total_rate(const DsmModel& model, const Sequence& seq);

template <class Scalar = double>
Scalar total_rate_of(const DsmModel& model, std::span<const Base> state) {
  Scalar total = 0;
  for (std::size_t i = 0; i < state.size(); ++i) total += model.site_exit_rate<Scalar>(state, i);
  return total;
}

// Applies `jump` to `state` and returns the change in total rate. Only sites
// within k/2 of the jump are re-evaluated; the sum runs over them in
// ascending order.
template <class Scalar = double>
Scalar apply_jump_delta(const DsmModel& model, std::span<Base> state, const Jump& jump) {
  const std::size_t h = model.context().half_width();
  const std::size_t lo = jump.site >= h ? jump.site - h : 0;
  const std::size_t hi = std::min(state.size() - 1, jump.site + h);
  constexpr std::size_t kMaxWindow = 64;
  Scalar before[kMaxWindow];
  const std::span<const Base> view(state.data(), state.size());
  for (std::size_t j = lo; j <= hi; ++j) before[j - lo] = model.site_exit_rate<Scalar>(view, j);
  state[jump.site] = jump.base;
  Scalar delta = 0;
  for (std::size_t j = lo; j <= hi; ++j) delta += model.site_exit_rate<Scalar>(view, j) - before[j - lo];
  return delta;
}

double total_rate_delta(const DsmModel& model, std::span<Base> state, const Jump& jump);

template <class Scalar>
struct DensityPair {
  Scalar ism;
  Scalar dsm;
};

// Replays `path` from pair.start() once and accumulates the ISM and DSM log
// densities side by side. The two accumulations use the same expression
// shapes, so when every multiplier is 1 they agree bit for bit.
//
// `ism_total` and `dsm_total` are the total exit rates of pair.start();
// `state` is scratch storage. Throws std::invalid_argument for an invalid
// path.
template <class Scalar = double>
DensityPair<Scalar> path_log_densities(const DsmModel& model, const Path& path,
                                       const SequencePair& pair, double T, Scalar ism_total,
                                       Scalar dsm_total, std::vector<Base>& state) {
  using std::log;
  if (path.horizon() != T) throw std::invalid_argument("path horizon differs from T");
  const auto start = pair.start().bases();
  const auto end = pair.end().bases();
  const std::size_t n = start.size();
  state.assign(start.begin(), start.end());
  const std::span<const Base> view(state.data(), n);

  std::size_t mismatched = pair.r();
  Scalar lp_ism = 0;
  Scalar lp_dsm = 0;
  double prev_t = 0.0;
  for (const Jump& jump : path.jumps()) {
    if (jump.site >= n) throw std::invalid_argument("jump site out of range");
    if (!(jump.time > prev_t)) throw std::invalid_argument("jump times not increasing");
    const Base from = state[jump.site];
    if (from == jump.base) throw std::invalid_argument("jump does not change its site");
    const SiteGenerator& g = model.ism().generator(jump.site);
    const Scalar dt = Scalar(jump.time - prev_t);
    const Scalar rate = Scalar(g.rate(from, jump.base));
    const Scalar phi = Scalar(model.context().at(view, jump.site, jump.base));

    lp_ism += log(rate) - dt * ism_total;
    ism_total += Scalar(g.exit_rate(jump.base)) - Scalar(g.exit_rate(from));

    lp_dsm += log(rate * phi) - dt * dsm_total;
    dsm_total += apply_jump_delta<Scalar>(model, std::span<Base>(state.data(), n), jump);

    mismatched -= from != end[jump.site];
    mismatched += jump.base != end[jump.site];
    prev_t = jump.time;
  }
  if (mismatched != 0) throw std::invalid_argument("path does not end at the target sequence");
  lp_ism -= Scalar(T - prev_t) * ism_total;
  lp_dsm -= Scalar(T - prev_t) * dsm_total;
  return {lp_ism, lp_dsm};
}

template <class Scalar = double>
DensityPair<Scalar> path_log_densities(const DsmModel& model, const Path& path,
                                       const SequencePair& pair, double T) {
  model.check_length(pair.n());
  const auto start = pair.start().bases();
  Scalar ism_total = 0;
  for (std::size_t i = 0; i < start.size(); ++i)
    ism_total += Scalar(model.ism().generator(i).exit_rate(start[i]));
  std::vector<Base> state;
  return path_log_densities<Scalar>(model, path, pair, T, ism_total,
                                    total_rate_of<Scalar>(model, start), state);
}

// sum_j log rate~_j - sum_j dt_{j-1} total~(x^{j-1}) - dt_m total~(y).
template <class Scalar = double>
Scalar dsm_path_log_density(const DsmModel& model, const Path& path, const SequencePair& pair,
                            double T) {
  return path_log_densities<Scalar>(model, path, pair, T).dsm;
}

// JC69 base rates with the CpG multiplier lambda^{CG(x_{i-1}, x_i) + CG(x_i, x_{i+1})}.
// Absent neighbours never form a CG. DNA alphabet only.
struct CpgParams {
  double lambda = 1.0;
  double base_rate = 1.0;  // JC69 exit rate
};

DsmModel make_cpg_model(const CpgParams& params);

// Number of CG dinucleotides that include site i (0, 1 or 2).
int cpg_count(std::span<const Base> state, std::size_t i);

}  // namespace dsmis
