#include "robustgp/robust_bounds.hpp"

#include "robustgp/errors.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace robustgp {

double gamma_of(const HyperVector& lower, const HyperVector& upper) {
    if (lower.dim() != upper.dim()) throw InputError("bounding pair dimensions differ");
    const double log_ratio = (upper.lengthscales.array().log() - lower.lengthscales.array().log()).sum();
    return std::exp(0.5 * log_ratio);
}

double gamma_of(const BoundingPair& pair) { return gamma_of(pair.lower, pair.upper); }

namespace {

// Face-peeling state over the packed sample coordinates.
class Peeler {
public:
    Peeler(const PosteriorSampleSet& samples, const VectorXd& anchor)
        : n_(samples.size()), p_(anchor.size()), anchor_(anchor), values_(p_, std::vector<double>(n_)),
          order_(p_), inside_(n_, true), low_(p_, 0), high_(p_, n_ - 1) {
        for (std::size_t k = 0; k < n_; ++k) {
            const VectorXd v = samples.samples[k].packed();
            for (Index c = 0; c < p_; ++c) values_[c][k] = v(c);
        }
        for (Index c = 0; c < p_; ++c) {
            order_[c].resize(n_);
            std::iota(order_[c].begin(), order_[c].end(), std::size_t{0});
            std::stable_sort(order_[c].begin(), order_[c].end(),
                             [&](std::size_t a, std::size_t b) { return values_[c][a] < values_[c][b]; });
        }
        inside_count_ = n_;
    }

    [[nodiscard]] std::size_t inside_count() const { return inside_count_; }

    [[nodiscard]] double lower(Index c) { return std::min(anchor_(c), value_at(c, first_inside(c, true))); }
    [[nodiscard]] double upper(Index c) { return std::max(anchor_(c), value_at(c, first_inside(c, false))); }

    [[nodiscard]] VectorXd widths() {
        VectorXd w(p_);
        for (Index c = 0; c < p_; ++c) w(c) = upper(c) - lower(c);
        return w;
    }

    struct Move {
        Index coord = 0;
        bool from_low = true;
        double score = -1.0;
        std::size_t removed = 0;  // samples removed by the first step (tie group)
    };

    // Best next peel over all 2p faces. score < 0 means no face can move.
    Move best_move(std::size_t lookahead) {
        const VectorXd w = widths();
        const double norm = w.norm();
        Move best;
        for (Index c = 0; c < p_; ++c) {
            for (bool from_low : {true, false}) {
                const auto [shift, used, first_group] = probe(c, from_low, lookahead);
                if (used == 0 || shift <= 0.0) continue;
                VectorXd w2 = w;
                w2(c) -= shift;
                const double score = (norm - w2.norm()) / static_cast<double>(used);
                if (score > best.score) best = Move{c, from_low, score, first_group};
            }
        }
        return best;
    }

    void apply(const Move& m) {
        const std::size_t first = first_inside(m.coord, m.from_low);
        const double v = values_[m.coord][order_[m.coord][first]];
        walk(m.coord, m.from_low, [&](std::size_t k) {
            if (values_[m.coord][k] != v) return false;
            inside_[k] = false;
            --inside_count_;
            return true;
        });
    }

private:
    struct Probe {
        double shift;
        std::size_t used;
        std::size_t first_group;
    };

    // Peeling up to `lookahead` inside samples strictly beyond the anchor on one face.
    Probe probe(Index c, bool from_low, std::size_t lookahead) {
        const double start = from_low ? lower(c) : upper(c);
        std::size_t used = 0;
        std::size_t first_group = 0;
        double first_value = 0.0;
        bool have_first = false;
        double last_removed = start;
        walk(c, from_low, [&](std::size_t k) {
            const double v = values_[c][k];
            const bool beyond = from_low ? v < anchor_(c) : v > anchor_(c);
            if (!beyond) return false;
            if (!have_first) {
                have_first = true;
                first_value = v;
            }
            if (v == first_value) ++first_group;
            if (used >= lookahead && v != last_removed) return false;
            ++used;
            last_removed = v;
            return true;
        });
        if (used == 0) return {0.0, 0, 0};
        // New face position: next inside value after the removed block, capped at the anchor.
        double next = anchor_(c);
        std::size_t seen = 0;
        walk(c, from_low, [&](std::size_t k) {
            if (seen++ < used) return true;
            next = from_low ? std::min(anchor_(c), values_[c][k]) : std::max(anchor_(c), values_[c][k]);
            return false;
        });
        return {std::abs(next - start), used, first_group};
    }

    // Visits inside samples from one end of coordinate c until fn returns false.
    template <class Fn>
    void walk(Index c, bool from_low, Fn&& fn) {
        if (from_low) {
            for (std::size_t i = first_inside(c, true); i < n_; ++i) {
                const std::size_t k = order_[c][i];
                if (!inside_[k]) continue;
                if (!fn(k)) return;
            }
        } else {
            for (std::size_t i = first_inside(c, false) + 1; i-- > 0;) {
                const std::size_t k = order_[c][i];
                if (!inside_[k]) continue;
                if (!fn(k)) return;
            }
        }
    }

    std::size_t first_inside(Index c, bool from_low) {
        if (from_low) {
            while (low_[c] < n_ && !inside_[order_[c][low_[c]]]) ++low_[c];
            return low_[c];
        }
        while (high_[c] > 0 && !inside_[order_[c][high_[c]]]) --high_[c];
        return high_[c];
    }

    double value_at(Index c, std::size_t pos) const {
        if (pos >= n_ || !inside_[order_[c][pos]]) return anchor_(c);
        return values_[c][order_[c][pos]];
    }

    std::size_t n_;
    Index p_;
    VectorXd anchor_;
    std::vector<std::vector<double>> values_;
    std::vector<std::vector<std::size_t>> order_;
    std::vector<bool> inside_;
    std::vector<std::size_t> low_;
    std::vector<std::size_t> high_;
    std::size_t inside_count_ = 0;
};

}  // namespace

BoundingPair find_bounding_pair(const PosteriorSampleSet& samples, const HyperVector& theta0, double delta) {
    if (!(delta > 0.0 && delta < 1.0)) throw InputError("delta must lie in (0,1)");
    if (samples.empty()) throw InputError("bounding pair needs posterior samples");
    const double needed = 50.0 / delta;
    if (static_cast<double>(samples.size()) < needed) {
        throw InputError("need at least " + std::to_string(static_cast<long>(std::ceil(needed))) +
                         " samples to certify mass at delta = " + std::to_string(delta) + ", got " +
                         std::to_string(samples.size()));
    }
    theta0.validate();
    if (samples.samples.front().dim() != theta0.dim()) throw InputError("theta0 dimension does not match samples");

    const std::size_t n = samples.size();
    const auto min_inside = static_cast<std::size_t>(std::ceil((1.0 - delta) * static_cast<double>(n) - 1e-9));
    const std::size_t lookahead = std::clamp<std::size_t>(n / 200, 1, 50);

    Peeler peeler(samples, theta0.packed());
    for (;;) {
        const auto move = peeler.best_move(lookahead);
        if (move.score < 0.0) break;
        if (peeler.inside_count() - move.removed < min_inside) break;
        peeler.apply(move);
    }

    const Index p = theta0.packed_size();
    VectorXd lo(p);
    VectorXd hi(p);
    for (Index c = 0; c < p; ++c) {
        lo(c) = peeler.lower(c);
        hi(c) = peeler.upper(c);
    }
    BoundingPair pair{HyperVector::from_packed(lo), HyperVector::from_packed(hi), delta, 0.0, 1.0};
    pair.achieved_mass = posterior_mass_in_box(samples, pair.lower, pair.upper);
    pair.gamma = gamma_of(pair);
    return pair;
}

BoundingPair sidak_box(const LaplacePosterior& laplace, double delta) {
    if (!(delta > 0.0 && delta < 1.0)) throw InputError("delta must lie in (0,1)");
    const Index p = laplace.mean.size();
    if (laplace.covariance.rows() != p || laplace.covariance.cols() != p) {
        throw InputError("Laplace covariance does not match its mean");
    }
    int free = 0;
    for (Index i = 0; i < p; ++i) {
        if (laplace.covariance(i, i) > 0.0) ++free;
    }
    const double level = free > 0 ? std::pow(1.0 - delta, 1.0 / free) : 1.0;
    const boost::math::normal standard;
    const double z = free > 0 ? boost::math::quantile(standard, 0.5 * (1.0 + level)) : 0.0;

    VectorXd lo(p);
    VectorXd hi(p);
    for (Index i = 0; i < p; ++i) {
        const double sd = std::sqrt(std::max(laplace.covariance(i, i), 0.0));
        lo(i) = std::exp(laplace.mean(i) - z * sd);
        hi(i) = std::exp(laplace.mean(i) + z * sd);
    }
    BoundingPair pair{HyperVector::from_packed(lo), HyperVector::from_packed(hi), delta, std::pow(level, free), 1.0};
    pair.gamma = gamma_of(pair);
    return pair;
}

double beta_bar_theoretical(double gamma, double beta_max_sqrt, const VectorXd& y, double sigma_n) {
    if (!(sigma_n > 0.0)) throw InputError("noise standard deviation must be positive");
    const double root = gamma * (beta_max_sqrt + 2.0 * y.norm() / sigma_n);
    return root * root;
}

double mean_discrepancy_bound(double gamma, const VectorXd& y, double sigma_n, double sigma_env_at_x) {
    if (!(sigma_n > 0.0)) throw InputError("noise standard deviation must be positive");
    return 2.0 * gamma * y.norm() * sigma_env_at_x / sigma_n;
}

HyperVector envelope_hyper(const BoundingPair& pair) {
    return HyperVector(pair.lower.lengthscales, pair.upper.signal_variance, pair.upper.noise_variance);
}

namespace {

double max_beta_sqrt_over_box(const BoundingPair& pair, const BetaSetting& beta) {
    if (!beta.beta_sqrt_function) return beta.beta_max_sqrt;
    const VectorXd lo = pair.lower.packed();
    const VectorXd hi = pair.upper.packed();
    const Index p = lo.size();
    double best = std::max(beta.beta_sqrt_function(pair.lower), beta.beta_sqrt_function(pair.upper));
    if (p > 12) return best;
    for (unsigned long mask = 0; mask < (1ul << p); ++mask) {
        VectorXd corner(p);
        for (Index i = 0; i < p; ++i) corner(i) = (mask >> i) & 1ul ? hi(i) : lo(i);
        best = std::max(best, beta.beta_sqrt_function(HyperVector::from_packed(corner)));
    }
    return best;
}

}  // namespace

RobustBound::RobustBound(GPModel working, GPModel envelope, double beta_bar, BetaMode mode)
    : working_(std::move(working)), envelope_(std::move(envelope)), beta_bar_(beta_bar), mode_(mode) {
    if (!(beta_bar_ > 0.0)) throw InputError("beta_bar must be positive");
}

RobustBound RobustBound::build(const Dataset& data, KernelFamily family, const HyperVector& theta0,
                               const BoundingPair& pair, const BetaSetting& beta) {
    GPModel working = GPModel::fit(KernelSpec{family, theta0}, data);
    GPModel envelope = GPModel::fit(KernelSpec{family, envelope_hyper(pair)}, data);
    double beta_bar = beta.beta;
    if (beta.mode == BetaMode::Theoretical) {
        // Smallest noise level in the box gives the largest discrepancy term.
        const double sigma_n = std::sqrt(pair.lower.noise_variance);
        beta_bar = beta_bar_theoretical(gamma_of(pair), max_beta_sqrt_over_box(pair, beta), data.y, sigma_n);
    }
    return RobustBound(std::move(working), std::move(envelope), beta_bar, beta.mode);
}

double RobustBound::half_width(const Eigen::Ref<const VectorXd>& xstar) const {
    return std::sqrt(beta_bar_) * envelope_.stddev(xstar);
}

std::pair<double, double> RobustBound::interval(const Eigen::Ref<const VectorXd>& xstar) const {
    const double mu = working_.mean(xstar);
    const double h = half_width(xstar);
    return {mu - h, mu + h};
}

}  // namespace robustgp
