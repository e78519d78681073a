#include "dsmis/dsm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace dsmis {

namespace {

constexpr std::size_t kTableLimit = 1'000'000;
constexpr std::size_t kProbes = 20'000;

// Absent entries may only pad the ends of a window, and the centre is present.
bool realizable(std::span<const int> window) {
  const std::size_t h = window.size() / 2;
  if (window[h] == ContextModel::kAbsent) return false;
  for (std::size_t j = 0; j < h; ++j)
    if (window[j + 1] == ContextModel::kAbsent && window[j] != ContextModel::kAbsent) return false;
  for (std::size_t j = h + 1; j < window.size(); ++j)
    if (window[j - 1] == ContextModel::kAbsent && window[j] != ContextModel::kAbsent) return false;
  return true;
}

}  // namespace

ContextModel::ContextModel(std::size_t alphabet_size, std::size_t k, Multiplier multiplier,
                           double phi_min, double phi_max)
    : a_(alphabet_size), k_(k), fn_(std::move(multiplier)), phi_min_(phi_min), phi_max_(phi_max) {
  if (a_ < 2) throw std::invalid_argument("context model needs alphabet size >= 2");
  if (k_ % 2 != 0) throw std::invalid_argument("context width k must be even");
  if (k_ > 62) throw std::invalid_argument("context width k too large");
  if (!fn_) throw std::invalid_argument("context multiplier is empty");
  if (!(phi_min_ > 0.0) || !(phi_max_ >= phi_min_) || !std::isfinite(phi_max_))
    throw std::invalid_argument("multiplier bounds must satisfy 0 < phi_min <= phi_max < inf");

  const std::size_t width = k_ + 1;
  double windows = 1.0;
  for (std::size_t j = 0; j < width; ++j) windows *= static_cast<double>(a_ + 1);
  std::vector<int> window(width);

  if (windows * static_cast<double>(a_) <= static_cast<double>(kTableLimit)) {
    const auto count = static_cast<std::size_t>(windows);
    table_.assign(count * a_, std::numeric_limits<double>::quiet_NaN());
    for (std::size_t code = 0; code < count; ++code) {
      std::size_t c = code;
      for (std::size_t j = 0; j < width; ++j, c /= a_ + 1)
        window[j] = static_cast<int>(c % (a_ + 1)) - 1;
      if (!realizable(window)) continue;
      for (std::size_t b = 0; b < a_; ++b) {
        if (static_cast<int>(b) == window[k_ / 2]) continue;
        const double v = fn_(static_cast<Base>(b), window);
        check_value(v);
        table_[code * a_ + b] = v;
      }
    }
    return;
  }

  Rng rng(0x5EEDC0DEull, 0);
  for (std::size_t probe = 0; probe < kProbes; ++probe) {
    for (auto& w : window) w = static_cast<int>(rng() % a_);
    const auto b = static_cast<Base>(rng() % a_);
    if (b == window[k_ / 2]) continue;
    check_value(fn_(b, window));
  }
}

ContextModel ContextModel::independent(std::size_t alphabet_size) {
  return ContextModel(alphabet_size, 0, [](Base, std::span<const int>) { return 1.0; }, 1.0, 1.0);
}

void ContextModel::check_value(double v) const {
  const double slack = 1e-12;
  if (!std::isfinite(v) || !(v > 0.0) || v < phi_min_ * (1.0 - slack) ||
      v > phi_max_ * (1.0 + slack)) {
    throw std::invalid_argument("context multiplier value " + std::to_string(v) +
                                " outside declared bounds [" + std::to_string(phi_min_) + ", " +
                                std::to_string(phi_max_) + "]");
  }
}

double ContextModel::multiplier(Base proposed, std::span<const int> window) const {
  if (window.size() != k_ + 1) throw std::invalid_argument("window must have k + 1 entries");
  if (tabulated()) {
    std::size_t code = 0;
    std::size_t scale = 1;
    for (std::size_t j = 0; j <= k_; ++j, scale *= a_ + 1)
      code += scale * static_cast<std::size_t>(window[j] + 1);
    return table_[code * a_ + proposed];
  }
  return fn_(proposed, window);
}

double ContextModel::at_slow(std::span<const Base> state, std::size_t i, Base proposed) const {
  thread_local std::vector<int> window;
  window.resize(k_ + 1);
  const std::size_t h = k_ / 2;
  for (std::size_t j = 0; j <= k_; ++j) {
    const std::size_t pos = i + j;
    window[j] = pos >= h && pos - h < state.size() ? state[pos - h] : kAbsent;
  }
  return fn_(proposed, window);
}

DsmModel::DsmModel(IsmModel ism, ContextModel context)
    : ism_(std::move(ism)), context_(std::move(context)) {
  if (ism_.alphabet_size() != context_.alphabet_size())
    throw std::invalid_argument("ISM and context model use different alphabets");
}

void DsmModel::check_length(std::size_t n) const {
  ism_.check_length(n);
  if (context_.k() + 1 > n) {
    throw std::invalid_argument("sequence length " + std::to_string(n) +
                                " is shorter than the context window k + 1 = " +
                                std::to_string(context_.k() + 1));
  }
}

double context_multiplier(const DsmModel& model, const Sequence& seq, std::size_t i, Base b) {
  if (i >= seq.size()) throw std::invalid_argument("site out of range");
  if (b == seq[i]) throw std::invalid_argument("proposed base equals the current base");
  return model.context().at(seq.bases(), i, b);
}

double total_rate(const DsmModel& model, const Sequence& seq) {
  model.check_length(seq.size());
  return total_rate_of<double>(model, seq.bases());
}

double total_rate_delta(const DsmModel& model, std::span<Base> state, const Jump& jump) {
  if (jump.site >= state.size()) throw std::invalid_argument("jump site out of range");
  if (state[jump.site] == jump.base) throw std::invalid_argument("jump does not change its site");
  return apply_jump_delta<double>(model, state, jump);
}

namespace {

constexpr Base kC = 1;
constexpr Base kG = 2;

bool is_cg(int left, int right) { return left == kC && right == kG; }

}  // namespace

int cpg_count(std::span<const Base> state, std::size_t i) {
  int count = 0;
  if (i > 0 && is_cg(state[i - 1], state[i])) ++count;
  if (i + 1 < state.size() && is_cg(state[i], state[i + 1])) ++count;
  return count;
}

DsmModel make_cpg_model(const CpgParams& params) {
  const double lambda = params.lambda;
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("lambda must be > 0");
  const double sq = lambda * lambda;
  auto phi = [lambda, sq](Base, std::span<const int> w) {
    const int e = is_cg(w[0], w[1]) + is_cg(w[1], w[2]);
    return e == 0 ? 1.0 : e == 1 ? lambda : sq;
  };
  return DsmModel(IsmModel(SiteGenerator::jc69(params.base_rate, 4)),
                  ContextModel(4, 2, phi, std::min(1.0, sq), std::max(1.0, sq)));
}

}  // namespace dsmis
