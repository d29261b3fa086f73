#include "nelder_mead.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include <cmath>
#include <memory>

namespace robustgp::detail {

namespace {

constexpr double kPenalty = 1e100;

struct Callback {
    const std::function<double(const Eigen::VectorXd&)>* f;
    Eigen::VectorXd scratch;
};

double trampoline(const gsl_vector* v, void* params) {
    auto* cb = static_cast<Callback*>(params);
    for (Eigen::Index i = 0; i < cb->scratch.size(); ++i) cb->scratch(i) = gsl_vector_get(v, static_cast<size_t>(i));
    const double value = (*cb->f)(cb->scratch);
    return std::isfinite(value) ? value : kPenalty;
}

struct VectorDeleter {
    void operator()(gsl_vector* v) const { gsl_vector_free(v); }
};
struct MinimizerDeleter {
    void operator()(gsl_multimin_fminimizer* m) const { gsl_multimin_fminimizer_free(m); }
};

std::unique_ptr<gsl_vector, VectorDeleter> to_gsl(const Eigen::VectorXd& x) {
    std::unique_ptr<gsl_vector, VectorDeleter> v(gsl_vector_alloc(static_cast<size_t>(x.size())));
    for (Eigen::Index i = 0; i < x.size(); ++i) gsl_vector_set(v.get(), static_cast<size_t>(i), x(i));
    return v;
}

}  // namespace

SimplexResult minimize_simplex(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& start,
                               const Eigen::VectorXd& step, int max_iterations, double size_tolerance) {
    SimplexResult result{start, f(start), 0};
    if (start.size() == 0) return result;

    // GSL's default handler aborts; errors are reported through status codes instead.
    gsl_error_handler_t* previous = gsl_set_error_handler_off();

    Callback cb{&f, Eigen::VectorXd(start.size())};
    gsl_multimin_function fn;
    fn.n = static_cast<size_t>(start.size());
    fn.f = &trampoline;
    fn.params = &cb;

    auto x0 = to_gsl(start);
    auto ss = to_gsl(step);
    std::unique_ptr<gsl_multimin_fminimizer, MinimizerDeleter> solver(
        gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, fn.n));
    gsl_multimin_fminimizer_set(solver.get(), &fn, x0.get(), ss.get());

    int iter = 0;
    int status = GSL_CONTINUE;
    while (status == GSL_CONTINUE && iter < max_iterations) {
        ++iter;
        if (gsl_multimin_fminimizer_iterate(solver.get()) != GSL_SUCCESS) break;
        status = gsl_multimin_test_size(gsl_multimin_fminimizer_size(solver.get()), size_tolerance);
    }

    const double best = gsl_multimin_fminimizer_minimum(solver.get());
    if (best < result.value) {
        const gsl_vector* xb = gsl_multimin_fminimizer_x(solver.get());
        for (Eigen::Index i = 0; i < start.size(); ++i) result.x(i) = gsl_vector_get(xb, static_cast<size_t>(i));
        result.value = best;
    }
    result.iterations = iter;
    gsl_set_error_handler(previous);
    return result;
}

}  // namespace robustgp::detail
