#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "copgof/estimation.hpp"
#include "copgof/grid.hpp"

namespace copgof::transform {

// Everything the score vector k and the slab information matrices need:
// fitted margins, fitted (or frozen) copula, and the trimming level delta.
// The score dimension is q = 1 + d*m + p, with p = 0 for a frozen copula.
struct ScoreContext {
    margins::Family margin_family{};
    std::vector<std::vector<double>> thetas;
    copulas::Family copula_family{};
    std::vector<double> lambda;
    bool copula_fixed = false;
    double delta = 0.05;

    int dim() const { return static_cast<int>(thetas.size()); }
    int margin_dim() const { return margins::param_dim(margin_family); }
    int copula_free_dim() const {
        return copula_fixed ? 0 : copulas::param_dim(copula_family);
    }
    int q() const { return 1 + dim() * margin_dim() + copula_free_dim(); }

    static ScoreContext from_fitted(const estimation::FittedModel& fitted, double delta);
    void validate() const;
};

// Score vector k(u): k_1 = 1; margin blocks
// dF(Q(u_j))/dtheta * dlog c/du_j + d/du_j[dF(Q(u_j))/dtheta]; copula block
// dlog c/dlambda.
Eigen::VectorXd score_vector(const ScoreContext& ctx, std::span<const double> u);

// Diagnostic K vector: (C, C^(j) dF(Q(u_j))/dtheta ..., dC/dlambda ...).
// k = dK/dC; used by the annihilation test.
Eigen::VectorXd K_functions(const ScoreContext& ctx, std::span<const double> u);

// Integral of f against eta_n over the closed hyperrectangle [lo, hi]
// (subset of [delta, 1-delta/2]^d): exact atom sum minus midpoint quadrature
// of f * c, scaled by sqrt(n).
double eta_integral(const ScoreContext& ctx, const Eigen::MatrixXd& pseudo,
                    const std::function<double(std::span<const double>)>& f,
                    std::span<const double> lo, std::span<const double> hi,
                    int nodes_per_axis = 400);

// Standalone partial information matrix with a fresh midpoint rule over the
// slab S_delta(t) = [delta, 1-delta/2]^{d-1} x [t, 1-delta/2].
Eigen::MatrixXd info_matrix(const ScoreContext& ctx, double t, int nodes_per_axis = 400);

// Shared tensor-midpoint machinery. One partition per axis covers
// [delta, 1-delta/2], split so that a cell boundary lands exactly on
// 1-delta; `nodes` cells cover [delta, 1-delta]. Per-node score vectors and
// copula densities are cached once; information matrices at any t come from
// one cumulative sweep in the last coordinate.
class ScoreQuadrature {
public:
    ScoreQuadrature(ScoreContext ctx, int nodes);

    const ScoreContext& context() const { return ctx_; }
    int nodes() const { return n_inner_; }
    int cells_per_axis() const { return m_total_; }
    double cell_edge(int i) const { return edges_[static_cast<std::size_t>(i)]; }
    double cell_mid(int i) const { return mids_[static_cast<std::size_t>(i)]; }
    double cell_width(int i) const { return widths_[static_cast<std::size_t>(i)]; }

    // cached values at tensor node (flat index, last axis fastest)
    double density_at(std::size_t flat) const { return c_[flat]; }
    std::span<const double> score_at(std::size_t flat) const {
        return {k_.data() + flat * static_cast<std::size_t>(q_), static_cast<std::size_t>(q_)};
    }
    std::size_t total_nodes() const { return c_.size(); }
    void node_point(std::size_t flat, std::span<double> out) const;
    double node_volume(std::size_t flat) const;
    bool node_is_inner(std::size_t flat) const;

    // I_delta(t) for t in [delta, 1-delta]
    Eigen::MatrixXd info_at(double t) const;
    Eigen::VectorXd info_solve(double t, const Eigen::VectorXd& rhs) const;

    // per-level masses of k f dC over [delta,1-delta/2]^{d-1} x cell, and the
    // suffix evaluation giving int_{S_delta(t)} k f dC
    std::vector<Eigen::VectorXd>
    k_level_masses(const std::function<double(std::span<const double>)>& f) const;
    Eigen::VectorXd suffix_eval(const std::vector<Eigen::VectorXd>& masses, double t) const;

    // int over [delta,1-delta]^d of k f dC (q-vector) and of f dC (scalar)
    Eigen::VectorXd inner_k_integral(const std::function<double(std::span<const double>)>& f) const;
    double inner_integral(const std::function<double(std::span<const double>)>& f) const;

private:
    void build();

    ScoreContext ctx_;
    int d_ = 0, q_ = 0;
    int n_inner_ = 0, m_total_ = 0;
    std::vector<double> edges_, mids_, widths_;
    std::vector<double> c_;
    std::vector<double> k_;
    std::vector<Eigen::MatrixXd> level_kkT_;   // per last-axis cell
    std::vector<Eigen::MatrixXd> suffix_kkT_;  // suffix sums, size m_total_+1
    friend class WnTransform;
};

// prefix-summable scalar field over the inner region [delta, 1-delta]^d
class PrefixField {
public:
    PrefixField() = default;
    PrefixField(int dim, int nodes, std::vector<double> cell_integrals);
    // fractional cell position per axis in [0, nodes]; exact separable
    // coverage sums via multilinear interpolation of the cumulative array
    double eval(std::span<const double> pos) const;

private:
    int d_ = 0, n_ = 0;
    std::vector<double> ps_;
};

struct TransformOptions {
    int quad_nodes = 400; // midpoint cells per axis on [delta, 1-delta]
    double condition_limit = 1e10;
};

// The empirical martingale transform W_n evaluated on a grid.
class WnTransform {
public:
    WnTransform(ScoreContext ctx, TransformOptions opts = {});

    const ScoreContext& context() const { return quad_.context(); }
    const ScoreQuadrature& quadrature() const { return quad_; }
    const std::vector<std::string>& warnings() const { return warnings_; }

    void set_sample(const Eigen::MatrixXd& pseudo);

    // J(t) = int_{S_delta(t)} k dEta_n; requires a sample
    Eigen::VectorXd inner_score_integral(double t) const;

    TestProcessGrid compute(const GridSpec& grid) const;

    // Deterministic signal run: the sample measure is replaced by dK_i,
    // whose integrals are evaluated on an independent finer partition. The
    // transform annihilates such signals up to discretization error.
    TestProcessGrid transform_signal(int signal_index, const GridSpec& grid,
                                     int signal_nodes = 1200) const;

private:
    ScoreQuadrature quad_;
    TransformOptions opts_;
    std::vector<std::string> warnings_;

    bool have_sample_ = false;
    long n_sample_ = 0;
    // atoms inside [delta, 1-delta/2]^d sorted by last coordinate, with k
    // evaluated at the atom; suffix sums give the atom part of J(t)
    std::vector<double> atom_last_;
    std::vector<Eigen::VectorXd> atom_k_suffix_;
    // atoms inside [delta, 1-delta]^d with weight c^{-1/2} for the first term
    Eigen::MatrixXd t1_atoms_;
    std::vector<double> t1_weights_;

    Eigen::VectorXd smooth_inner_integral_at(double t) const; // int_{S(t)} k c
    std::vector<Eigen::VectorXd> level_kc_;
    std::vector<Eigen::VectorXd> suffix_kc_;

    TestProcessGrid assemble(const GridSpec& grid, const PrefixField& first_term_smooth,
                             const std::function<double(std::span<const double>)>& atom_term,
                             const std::vector<Eigen::VectorXd>& B_levels) const;
};

// Convenience wrapper: context from a fitted model, transform, statistics.
TestProcessGrid compute_wn(const estimation::FittedModel& fitted, const Eigen::MatrixXd& pseudo,
                           double delta, const GridSpec& grid, TransformOptions opts = {});

} // namespace copgof::transform
