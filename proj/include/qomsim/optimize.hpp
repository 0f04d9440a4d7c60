#pragma once

#include <functional>
#include <vector>

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include "core.hpp"

namespace qomsim {

struct MinimizeResult {
    std::vector<double> x;
    double f = 0;
    int iterations = 0;
    bool converged = false;
};

// Nelder-Mead simplex (GSL nmsimplex2).
inline MinimizeResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                                  std::vector<double> x0, std::vector<double> step,
                                  double size_tol = 1e-8, int max_iter = 2000) {
    const std::size_t n = x0.size();
    require(n > 0 && step.size() == n, "Nelder-Mead needs matching start and step vectors");
    struct Ctx {
        const std::function<double(const std::vector<double>&)>* f;
        std::size_t n;
    } ctx{&f, n};
    gsl_multimin_function fn;
    fn.n = n;
    fn.params = &ctx;
    fn.f = [](const gsl_vector* v, void* p) {
        auto* c = static_cast<Ctx*>(p);
        std::vector<double> x(c->n);
        for (std::size_t i = 0; i < c->n; ++i) x[i] = gsl_vector_get(v, i);
        return (*c->f)(x);
    };
    gsl_vector* x = gsl_vector_alloc(n);
    gsl_vector* ss = gsl_vector_alloc(n);
    for (std::size_t i = 0; i < n; ++i) {
        gsl_vector_set(x, i, x0[i]);
        gsl_vector_set(ss, i, step[i]);
    }
    gsl_multimin_fminimizer* s = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, n);
    gsl_multimin_fminimizer_set(s, &fn, x, ss);
    MinimizeResult r;
    int status = GSL_CONTINUE;
    while (status == GSL_CONTINUE && r.iterations < max_iter) {
        ++r.iterations;
        if (gsl_multimin_fminimizer_iterate(s)) break;
        status = gsl_multimin_test_size(gsl_multimin_fminimizer_size(s), size_tol);
    }
    r.converged = status == GSL_SUCCESS;
    r.x.resize(n);
    for (std::size_t i = 0; i < n; ++i) r.x[i] = gsl_vector_get(s->x, i);
    r.f = s->fval;
    gsl_multimin_fminimizer_free(s);
    gsl_vector_free(x);
    gsl_vector_free(ss);
    return r;
}

}  // namespace qomsim
