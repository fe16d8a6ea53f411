#include "copgof/transform.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

#include "copgof/errors.hpp"

namespace copgof::transform {

namespace cp = copgof::copulas;
namespace mg = copgof::margins;

// ---------------------------------------------------------------------------
// ScoreContext
// ---------------------------------------------------------------------------

ScoreContext ScoreContext::from_fitted(const estimation::FittedModel& fitted, double delta) {
    ScoreContext ctx;
    ctx.margin_family = fitted.margin_family;
    ctx.thetas = fitted.thetas;
    ctx.copula_family = fitted.copula_family;
    ctx.lambda = fitted.lambda;
    ctx.copula_fixed = fitted.copula_fixed;
    ctx.delta = delta;
    ctx.validate();
    return ctx;
}

void ScoreContext::validate() const {
    if (!(delta > 0.0 && delta < 0.5))
        throw invalid_parameters("delta must lie strictly inside (0, 1/2)");
    if (dim() < 2) throw invalid_parameters("score context needs d >= 2");
    for (const auto& th : thetas) mg::validate(margin_family, th);
    cp::validate(copula_family, lambda);
    if (!cp::supports_dim(copula_family, dim()))
        throw invalid_parameters("copula family does not support this dimension");
    if (copula_family == cp::Family::independence && !copula_fixed && false)
        ; // p = 0 handles itself
}

// ---------------------------------------------------------------------------
// score vector and K diagnostics
// ---------------------------------------------------------------------------

Eigen::VectorXd score_vector(const ScoreContext& ctx, std::span<const double> u) {
    const int d = ctx.dim(), m = ctx.margin_dim(), p = ctx.copula_free_dim();
    if (static_cast<int>(u.size()) != d) throw domain_error("score_vector: wrong point dimension");
    const auto grads = cp::log_density_grads(ctx.copula_family, ctx.lambda, u);
    Eigen::VectorXd k(ctx.q());
    k[0] = 1.0;
    for (int j = 0; j < d; ++j) {
        const auto sq = mg::score_at_quantile(ctx.margin_family,
                                              ctx.thetas[static_cast<std::size_t>(j)], u[j]);
        for (int i = 0; i < m; ++i)
            k[1 + j * m + i] = sq.value[i] * grads.grad_u[j] + sq.du[i];
    }
    for (int i = 0; i < p; ++i) k[1 + d * m + i] = grads.grad_lambda[i];
    return k;
}

Eigen::VectorXd K_functions(const ScoreContext& ctx, std::span<const double> u) {
    const int d = ctx.dim(), m = ctx.margin_dim(), p = ctx.copula_free_dim();
    if (static_cast<int>(u.size()) != d) throw domain_error("K_functions: wrong point dimension");
    Eigen::VectorXd K(ctx.q());
    K[0] = cp::cdf(ctx.copula_family, ctx.lambda, u);
    for (int j = 0; j < d; ++j) {
        const double cj = cp::partial_u(ctx.copula_family, ctx.lambda, u, j);
        const auto sq = mg::score_at_quantile(ctx.margin_family,
                                              ctx.thetas[static_cast<std::size_t>(j)], u[j]);
        for (int i = 0; i < m; ++i) K[1 + j * m + i] = cj * sq.value[i];
    }
    if (p > 0) {
        const auto cdot = cp::cdf_lambda_grad(ctx.copula_family, ctx.lambda, u);
        for (int i = 0; i < p; ++i) K[1 + d * m + i] = cdot[i];
    }
    return K;
}

// ---------------------------------------------------------------------------
// standalone integrals
// ---------------------------------------------------------------------------

namespace {

void check_region(const ScoreContext& ctx, std::span<const double> lo,
                  std::span<const double> hi) {
    const int d = ctx.dim();
    if (static_cast<int>(lo.size()) != d || static_cast<int>(hi.size()) != d)
        throw domain_error("region dimension mismatch");
    const double top = 1.0 - ctx.delta / 2.0 + 1e-12;
    for (int j = 0; j < d; ++j) {
        if (lo[j] > hi[j]) throw domain_error("empty region");
        if (lo[j] < ctx.delta - 1e-12 || hi[j] > top)
            throw domain_error("region must lie inside [delta, 1-delta/2]^d");
    }
}

// midpoint tensor quadrature of f(u) * c(u) over [lo, hi]
double smooth_measure_integral(const ScoreContext& ctx,
                               const std::function<double(std::span<const double>)>& f,
                               std::span<const double> lo, std::span<const double> hi,
                               int nodes) {
    const int d = ctx.dim();
    std::vector<double> width(static_cast<std::size_t>(d));
    double vol = 1.0;
    for (int j = 0; j < d; ++j) {
        width[static_cast<std::size_t>(j)] = (hi[j] - lo[j]) / nodes;
        vol *= width[static_cast<std::size_t>(j)];
    }
    if (vol == 0.0) return 0.0;
    std::vector<int> idx(static_cast<std::size_t>(d), 0);
    std::vector<double> pt(static_cast<std::size_t>(d));
    double acc = 0.0;
    for (;;) {
        for (int j = 0; j < d; ++j)
            pt[static_cast<std::size_t>(j)] =
                lo[j] + (idx[static_cast<std::size_t>(j)] + 0.5) * width[static_cast<std::size_t>(j)];
        acc += f(pt) * cp::density(ctx.copula_family, ctx.lambda, pt);
        int j = d - 1;
        for (; j >= 0; --j) {
            if (++idx[static_cast<std::size_t>(j)] < nodes) break;
            idx[static_cast<std::size_t>(j)] = 0;
        }
        if (j < 0) break;
    }
    return acc * vol;
}

} // namespace

double eta_integral(const ScoreContext& ctx, const Eigen::MatrixXd& pseudo,
                    const std::function<double(std::span<const double>)>& f,
                    std::span<const double> lo, std::span<const double> hi, int nodes_per_axis) {
    check_region(ctx, lo, hi);
    const int d = ctx.dim();
    if (pseudo.cols() != d) throw domain_error("pseudo-observation dimension mismatch");
    const auto n = pseudo.rows();

    // atom part: closed rectangle, boundary points included
    double atom = 0.0;
    std::vector<double> pt(static_cast<std::size_t>(d));
    for (Eigen::Index i = 0; i < n; ++i) {
        bool inside = true;
        for (int j = 0; j < d && inside; ++j) {
            const double v = pseudo(i, j);
            inside = v >= lo[j] && v <= hi[j];
        }
        if (!inside) continue;
        for (int j = 0; j < d; ++j) pt[static_cast<std::size_t>(j)] = pseudo(i, j);
        atom += f(pt);
    }
    const double smooth = smooth_measure_integral(ctx, f, lo, hi, nodes_per_axis);
    const double rn = std::sqrt(static_cast<double>(n));
    return rn * (atom / static_cast<double>(n) - smooth);
}

Eigen::MatrixXd info_matrix(const ScoreContext& ctx, double t, int nodes_per_axis) {
    const int d = ctx.dim();
    if (!(t >= ctx.delta && t <= 1.0 - ctx.delta))
        throw domain_error("info_matrix: t outside [delta, 1-delta]");
    std::vector<double> lo(static_cast<std::size_t>(d), ctx.delta);
    std::vector<double> hi(static_cast<std::size_t>(d), 1.0 - ctx.delta / 2.0);
    lo[static_cast<std::size_t>(d) - 1] = t;

    std::vector<double> width(static_cast<std::size_t>(d));
    double vol = 1.0;
    for (int j = 0; j < d; ++j) {
        width[static_cast<std::size_t>(j)] = (hi[static_cast<std::size_t>(j)] - lo[static_cast<std::size_t>(j)]) / nodes_per_axis;
        vol *= width[static_cast<std::size_t>(j)];
    }
    Eigen::MatrixXd I = Eigen::MatrixXd::Zero(ctx.q(), ctx.q());
    std::vector<int> idx(static_cast<std::size_t>(d), 0);
    std::vector<double> pt(static_cast<std::size_t>(d));
    for (;;) {
        for (int j = 0; j < d; ++j)
            pt[static_cast<std::size_t>(j)] = lo[static_cast<std::size_t>(j)] +
                                              (idx[static_cast<std::size_t>(j)] + 0.5) *
                                                  width[static_cast<std::size_t>(j)];
        const Eigen::VectorXd k = score_vector(ctx, pt);
        I.selfadjointView<Eigen::Lower>().rankUpdate(
            k, cp::density(ctx.copula_family, ctx.lambda, pt));
        int j = d - 1;
        for (; j >= 0; --j) {
            if (++idx[static_cast<std::size_t>(j)] < nodes_per_axis) break;
            idx[static_cast<std::size_t>(j)] = 0;
        }
        if (j < 0) break;
    }
    I = vol * I.selfadjointView<Eigen::Lower>();
    return I;
}

// ---------------------------------------------------------------------------
// ScoreQuadrature
// ---------------------------------------------------------------------------

ScoreQuadrature::ScoreQuadrature(ScoreContext ctx, int nodes) : ctx_(std::move(ctx)) {
    ctx_.validate();
    if (nodes < 8) throw invalid_parameters("quadrature needs at least 8 cells per axis");
    d_ = ctx_.dim();
    q_ = ctx_.q();
    n_inner_ = nodes;

    const double delta = ctx_.delta;
    const double w_in = (1.0 - 2.0 * delta) / nodes;
    const int n_ext = std::max(1, static_cast<int>(std::ceil((delta / 2.0) / w_in)));
    const double w_ext = (delta / 2.0) / n_ext;
    m_total_ = nodes + n_ext;

    edges_.resize(static_cast<std::size_t>(m_total_) + 1);
    for (int i = 0; i <= nodes; ++i) edges_[static_cast<std::size_t>(i)] = delta + i * w_in;
    edges_[static_cast<std::size_t>(nodes)] = 1.0 - delta; // exact boundary
    for (int i = 1; i <= n_ext; ++i)
        edges_[static_cast<std::size_t>(nodes + i)] = (1.0 - delta) + i * w_ext;
    edges_.back() = 1.0 - delta / 2.0;

    mids_.resize(static_cast<std::size_t>(m_total_));
    widths_.resize(static_cast<std::size_t>(m_total_));
    for (int i = 0; i < m_total_; ++i) {
        mids_[static_cast<std::size_t>(i)] =
            0.5 * (edges_[static_cast<std::size_t>(i)] + edges_[static_cast<std::size_t>(i) + 1]);
        widths_[static_cast<std::size_t>(i)] =
            edges_[static_cast<std::size_t>(i) + 1] - edges_[static_cast<std::size_t>(i)];
    }
    build();
}

void ScoreQuadrature::node_point(std::size_t flat, std::span<double> out) const {
    for (int j = d_ - 1; j >= 0; --j) {
        out[static_cast<std::size_t>(j)] =
            mids_[flat % static_cast<std::size_t>(m_total_)];
        flat /= static_cast<std::size_t>(m_total_);
    }
}

double ScoreQuadrature::node_volume(std::size_t flat) const {
    double v = 1.0;
    for (int j = 0; j < d_; ++j) {
        v *= widths_[flat % static_cast<std::size_t>(m_total_)];
        flat /= static_cast<std::size_t>(m_total_);
    }
    return v;
}

bool ScoreQuadrature::node_is_inner(std::size_t flat) const {
    for (int j = 0; j < d_; ++j) {
        if (flat % static_cast<std::size_t>(m_total_) >= static_cast<std::size_t>(n_inner_))
            return false;
        flat /= static_cast<std::size_t>(m_total_);
    }
    return true;
}

void ScoreQuadrature::build() {
    const int d = d_, m = ctx_.margin_dim(), p = ctx_.copula_free_dim(), M = m_total_;
    std::size_t total = 1;
    for (int j = 0; j < d; ++j) total *= static_cast<std::size_t>(M);
    c_.resize(total);
    k_.resize(total * static_cast<std::size_t>(q_));

    // margin score pieces only depend on one coordinate: cache per axis/cell
    std::vector<double> msv(static_cast<std::size_t>(d * M * m));
    std::vector<double> msd(static_cast<std::size_t>(d * M * m));
    for (int j = 0; j < d; ++j) {
        const auto& th = ctx_.thetas[static_cast<std::size_t>(j)];
        for (int i = 0; i < M; ++i) {
            const auto sq =
                mg::score_at_quantile(ctx_.margin_family, th, mids_[static_cast<std::size_t>(i)]);
            for (int r = 0; r < m; ++r) {
                msv[static_cast<std::size_t>((j * M + i) * m + r)] = sq.value[r];
                msd[static_cast<std::size_t>((j * M + i) * m + r)] = sq.du[r];
            }
        }
    }

    level_kkT_.assign(static_cast<std::size_t>(M), Eigen::MatrixXd::Zero(q_, q_));
    level_kc_.assign(static_cast<std::size_t>(M), Eigen::VectorXd::Zero(q_));

    std::vector<int> idx(static_cast<std::size_t>(d), 0);
    std::vector<double> pt(static_cast<std::size_t>(d));
    Eigen::VectorXd k(q_);
    for (std::size_t flat = 0; flat < total; ++flat) {
        double vol = 1.0;
        for (int j = 0; j < d; ++j) {
            pt[static_cast<std::size_t>(j)] = mids_[static_cast<std::size_t>(idx[static_cast<std::size_t>(j)])];
            vol *= widths_[static_cast<std::size_t>(idx[static_cast<std::size_t>(j)])];
        }
        const double lc = cp::log_density(ctx_.copula_family, ctx_.lambda, pt);
        const double c = std::exp(lc);
        const auto grads = cp::log_density_grads(ctx_.copula_family, ctx_.lambda, pt);
        k[0] = 1.0;
        for (int j = 0; j < d; ++j) {
            const std::size_t base = static_cast<std::size_t>((j * M + idx[static_cast<std::size_t>(j)]) * m);
            for (int r = 0; r < m; ++r)
                k[1 + j * m + r] = msv[base + static_cast<std::size_t>(r)] * grads.grad_u[j] +
                                   msd[base + static_cast<std::size_t>(r)];
        }
        for (int r = 0; r < p; ++r) k[1 + d * m + r] = grads.grad_lambda[r];

        c_[flat] = c;
        for (int r = 0; r < q_; ++r) k_[flat * static_cast<std::size_t>(q_) + static_cast<std::size_t>(r)] = k[r];

        const int level = idx[static_cast<std::size_t>(d) - 1];
        const double w = c * vol;
        level_kkT_[static_cast<std::size_t>(level)].selfadjointView<Eigen::Lower>().rankUpdate(k, w);
        level_kc_[static_cast<std::size_t>(level)] += w * k;

        for (int j = d - 1; j >= 0; --j) {
            if (++idx[static_cast<std::size_t>(j)] < M) break;
            idx[static_cast<std::size_t>(j)] = 0;
        }
    }
    for (auto& Mx : level_kkT_) Mx = Mx.selfadjointView<Eigen::Lower>();

    suffix_kkT_.assign(static_cast<std::size_t>(M) + 1, Eigen::MatrixXd::Zero(q_, q_));
    suffix_kc_.assign(static_cast<std::size_t>(M) + 1, Eigen::VectorXd::Zero(q_));
    for (int l = M - 1; l >= 0; --l) {
        suffix_kkT_[static_cast<std::size_t>(l)] =
            suffix_kkT_[static_cast<std::size_t>(l) + 1] + level_kkT_[static_cast<std::size_t>(l)];
        suffix_kc_[static_cast<std::size_t>(l)] =
            suffix_kc_[static_cast<std::size_t>(l) + 1] + level_kc_[static_cast<std::size_t>(l)];
    }
}

namespace {

int locate_cell(const std::vector<double>& edges, double t) {
    // cell index i with edges[i] <= t < edges[i+1], clamped
    const auto it = std::upper_bound(edges.begin(), edges.end(), t);
    int i = static_cast<int>(it - edges.begin()) - 1;
    i = std::clamp(i, 0, static_cast<int>(edges.size()) - 2);
    return i;
}

} // namespace

Eigen::MatrixXd ScoreQuadrature::info_at(double t) const {
    if (!(t >= ctx_.delta - 1e-12 && t <= 1.0 - ctx_.delta + 1e-12))
        throw domain_error("info_at: t outside [delta, 1-delta]");
    const int cell = locate_cell(edges_, t);
    const double frac =
        (edges_[static_cast<std::size_t>(cell) + 1] - t) / widths_[static_cast<std::size_t>(cell)];
    return suffix_kkT_[static_cast<std::size_t>(cell) + 1] +
           frac * level_kkT_[static_cast<std::size_t>(cell)];
}

Eigen::VectorXd ScoreQuadrature::info_solve(double t, const Eigen::VectorXd& rhs) const {
    const Eigen::MatrixXd I = info_at(t);
    Eigen::LLT<Eigen::MatrixXd> llt(I);
    if (llt.info() != Eigen::Success)
        throw singular_information("information matrix not positive definite at t=" +
                                   std::to_string(t));
    return llt.solve(rhs);
}

std::vector<Eigen::VectorXd>
ScoreQuadrature::k_level_masses(const std::function<double(std::span<const double>)>& f) const {
    const int M = m_total_;
    std::vector<Eigen::VectorXd> masses(static_cast<std::size_t>(M),
                                        Eigen::VectorXd::Zero(q_));
    std::vector<double> pt(static_cast<std::size_t>(d_));
    for (std::size_t flat = 0; flat < total_nodes(); ++flat) {
        node_point(flat, pt);
        const double w = f(pt) * c_[flat] * node_volume(flat);
        if (w == 0.0) continue;
        const auto k = score_at(flat);
        auto& mvec = masses[flat % static_cast<std::size_t>(M)];
        for (int r = 0; r < q_; ++r) mvec[r] += w * k[static_cast<std::size_t>(r)];
    }
    return masses;
}

Eigen::VectorXd ScoreQuadrature::suffix_eval(const std::vector<Eigen::VectorXd>& masses,
                                             double t) const {
    const int cell = locate_cell(edges_, t);
    const double frac =
        (edges_[static_cast<std::size_t>(cell) + 1] - t) / widths_[static_cast<std::size_t>(cell)];
    Eigen::VectorXd out = frac * masses[static_cast<std::size_t>(cell)];
    for (std::size_t l = static_cast<std::size_t>(cell) + 1; l < masses.size(); ++l)
        out += masses[l];
    return out;
}

Eigen::VectorXd
ScoreQuadrature::inner_k_integral(const std::function<double(std::span<const double>)>& f) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(q_);
    std::vector<double> pt(static_cast<std::size_t>(d_));
    for (std::size_t flat = 0; flat < total_nodes(); ++flat) {
        if (!node_is_inner(flat)) continue;
        node_point(flat, pt);
        const double w = f(pt) * c_[flat] * node_volume(flat);
        if (w == 0.0) continue;
        const auto k = score_at(flat);
        for (int r = 0; r < q_; ++r) out[r] += w * k[static_cast<std::size_t>(r)];
    }
    return out;
}

double
ScoreQuadrature::inner_integral(const std::function<double(std::span<const double>)>& f) const {
    double out = 0.0;
    std::vector<double> pt(static_cast<std::size_t>(d_));
    for (std::size_t flat = 0; flat < total_nodes(); ++flat) {
        if (!node_is_inner(flat)) continue;
        node_point(flat, pt);
        out += f(pt) * c_[flat] * node_volume(flat);
    }
    return out;
}

// ---------------------------------------------------------------------------
// PrefixField
// ---------------------------------------------------------------------------

PrefixField::PrefixField(int dim, int nodes, std::vector<double> cell_integrals)
    : d_(dim), n_(nodes) {
    const std::size_t np1 = static_cast<std::size_t>(n_) + 1;
    std::size_t total = 1;
    for (int j = 0; j < d_; ++j) total *= np1;
    ps_.assign(total, 0.0);

    // scatter the cell values into the (i+1, ...) positions
    std::vector<int> idx(static_cast<std::size_t>(d_), 0);
    for (std::size_t f = 0; f < cell_integrals.size(); ++f) {
        std::size_t pos = 0;
        for (int j = 0; j < d_; ++j)
            pos = pos * np1 + static_cast<std::size_t>(idx[static_cast<std::size_t>(j)]) + 1;
        ps_[pos] = cell_integrals[f];
        for (int j = d_ - 1; j >= 0; --j) {
            if (++idx[static_cast<std::size_t>(j)] < n_) break;
            idx[static_cast<std::size_t>(j)] = 0;
        }
    }
    // cumulative sum along each axis
    for (int axis = 0; axis < d_; ++axis) {
        std::size_t stride = 1;
        for (int j = axis + 1; j < d_; ++j) stride *= np1;
        const std::size_t block = stride * np1;
        for (std::size_t start = 0; start < ps_.size(); start += block) {
            for (std::size_t off = 0; off < stride; ++off)
                for (std::size_t i = 1; i < np1; ++i)
                    ps_[start + off + i * stride] += ps_[start + off + (i - 1) * stride];
        }
    }
}

double PrefixField::eval(std::span<const double> pos) const {
    const std::size_t np1 = static_cast<std::size_t>(n_) + 1;
    std::vector<int> base(static_cast<std::size_t>(d_));
    std::vector<double> frac(static_cast<std::size_t>(d_));
    for (int j = 0; j < d_; ++j) {
        double p = std::clamp(pos[static_cast<std::size_t>(j)], 0.0, static_cast<double>(n_));
        int i = static_cast<int>(p);
        if (i >= n_) {
            i = n_ - 1;
            frac[static_cast<std::size_t>(j)] = 1.0;
        } else {
            frac[static_cast<std::size_t>(j)] = p - i;
        }
        base[static_cast<std::size_t>(j)] = i;
    }
    double out = 0.0;
    for (int corner = 0; corner < (1 << d_); ++corner) {
        double w = 1.0;
        std::size_t flat = 0;
        for (int j = 0; j < d_; ++j) {
            const bool hi = corner & (1 << j);
            w *= hi ? frac[static_cast<std::size_t>(j)] : 1.0 - frac[static_cast<std::size_t>(j)];
            flat = flat * np1 + static_cast<std::size_t>(base[static_cast<std::size_t>(j)]) +
                   (hi ? 1 : 0);
        }
        if (w != 0.0) out += w * ps_[flat];
    }
    return out;
}

// ---------------------------------------------------------------------------
// WnTransform
// ---------------------------------------------------------------------------

WnTransform::WnTransform(ScoreContext ctx, TransformOptions opts)
    : quad_(std::move(ctx), opts.quad_nodes), opts_(opts) {
    if (quad_.context().delta < 1e-3)
        warnings_.push_back("delta below 1e-3 is numerically untested");
}

void WnTransform::set_sample(const Eigen::MatrixXd& pseudo) {
    const auto& ctx = quad_.context();
    const int d = ctx.dim();
    if (pseudo.cols() != d) throw domain_error("pseudo-observation dimension mismatch");
    n_sample_ = pseudo.rows();
    const double delta = ctx.delta;
    const double top = 1.0 - delta / 2.0;

    // atoms feeding the inner score integral: inside [delta, 1-delta/2]^d,
    // sorted by last coordinate, with suffix-summed score vectors
    std::vector<std::pair<double, Eigen::VectorXd>> atoms;
    std::vector<double> pt(static_cast<std::size_t>(d));
    for (Eigen::Index i = 0; i < pseudo.rows(); ++i) {
        bool inside = true;
        for (int j = 0; j < d && inside; ++j)
            inside = pseudo(i, j) >= delta && pseudo(i, j) <= top;
        if (!inside) continue;
        for (int j = 0; j < d; ++j) pt[static_cast<std::size_t>(j)] = pseudo(i, j);
        atoms.emplace_back(pseudo(i, d - 1), score_vector(ctx, pt));
    }
    std::sort(atoms.begin(), atoms.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    atom_last_.resize(atoms.size());
    atom_k_suffix_.assign(atoms.size() + 1, Eigen::VectorXd::Zero(ctx.q()));
    for (std::size_t i = atoms.size(); i-- > 0;) {
        atom_last_[i] = atoms[i].first;
        atom_k_suffix_[i] = atom_k_suffix_[i + 1] + atoms[i].second;
    }

    // atoms feeding the first term: inside [delta, 1-delta]^d with weight
    // c^{-1/2}
    std::vector<Eigen::VectorXd> rows;
    t1_weights_.clear();
    for (Eigen::Index i = 0; i < pseudo.rows(); ++i) {
        bool inside = true;
        for (int j = 0; j < d && inside; ++j)
            inside = pseudo(i, j) >= delta && pseudo(i, j) <= 1.0 - delta;
        if (!inside) continue;
        for (int j = 0; j < d; ++j) pt[static_cast<std::size_t>(j)] = pseudo(i, j);
        rows.emplace_back(pseudo.row(i));
        t1_weights_.push_back(
            1.0 / std::sqrt(cp::density(ctx.copula_family, ctx.lambda, pt)));
    }
    t1_atoms_.resize(static_cast<Eigen::Index>(rows.size()), d);
    for (std::size_t i = 0; i < rows.size(); ++i) t1_atoms_.row(static_cast<Eigen::Index>(i)) = rows[i];

    have_sample_ = true;
}

Eigen::VectorXd WnTransform::smooth_inner_integral_at(double t) const {
    return quad_.suffix_eval(quad_.level_kc_, t);
}

Eigen::VectorXd WnTransform::inner_score_integral(double t) const {
    if (!have_sample_) throw domain_error("inner_score_integral: no sample attached");
    const auto& ctx = quad_.context();
    if (!(t >= ctx.delta && t <= 1.0 - ctx.delta))
        throw domain_error("inner_score_integral: t outside [delta, 1-delta]");
    // atom part: suffix over atoms with last coordinate >= t (closed)
    const auto it = std::lower_bound(atom_last_.begin(), atom_last_.end(), t);
    const auto idx = static_cast<std::size_t>(it - atom_last_.begin());
    const Eigen::VectorXd atom = atom_k_suffix_[idx];
    const double rn = std::sqrt(static_cast<double>(n_sample_));
    return rn * (atom / static_cast<double>(n_sample_) - smooth_inner_integral_at(t));
}

TestProcessGrid WnTransform::assemble(
    const GridSpec& grid, const PrefixField& first_term_smooth,
    const std::function<double(std::span<const double>)>& atom_term,
    const std::vector<Eigen::VectorXd>& B_levels) const {
    const auto& ctx = quad_.context();
    const int d = ctx.dim();
    if (grid.dim() != d) throw grid_mismatch("grid dimension does not match the model");
    const int q = ctx.q();
    const int N = quad_.nodes();

    // second-term prefix field: cells of k^T B(level) sqrt(c) * vol over the
    // inner region
    std::vector<double> cells(static_cast<std::size_t>(std::pow(N, d)), 0.0);
    {
        std::vector<double> pt(static_cast<std::size_t>(d));
        std::vector<int> idx(static_cast<std::size_t>(d), 0);
        const int M = quad_.cells_per_axis();
        for (std::size_t flat = 0; flat < quad_.total_nodes(); ++flat) {
            // advance multi-index bookkeeping first to skip outer cells fast
            bool inner = true;
            for (int j = 0; j < d; ++j) inner = inner && idx[static_cast<std::size_t>(j)] < N;
            if (inner) {
                const int level = idx[static_cast<std::size_t>(d) - 1];
                const auto k = quad_.score_at(flat);
                const auto& B = B_levels[static_cast<std::size_t>(level)];
                double dot = 0.0;
                for (int r = 0; r < q; ++r) dot += k[static_cast<std::size_t>(r)] * B[r];
                std::size_t cflat = 0;
                for (int j = 0; j < d; ++j)
                    cflat = cflat * static_cast<std::size_t>(N) +
                            static_cast<std::size_t>(idx[static_cast<std::size_t>(j)]);
                cells[cflat] = dot * std::sqrt(quad_.density_at(flat)) * quad_.node_volume(flat);
            }
            for (int j = d - 1; j >= 0; --j) {
                if (++idx[static_cast<std::size_t>(j)] < M) break;
                idx[static_cast<std::size_t>(j)] = 0;
            }
        }
    }
    const PrefixField second_term(d, N, std::move(cells));

    TestProcessGrid out;
    out.grid = grid;
    out.delta = ctx.delta;
    out.sample_size = n_sample_;
    out.values.assign(grid.total(), 0.0);

    const double coef = std::pow(1.0 - 2.0 * ctx.delta, -0.5 * d);
    std::vector<std::size_t> gsize(static_cast<std::size_t>(d));
    for (int j = 0; j < d; ++j) gsize[static_cast<std::size_t>(j)] = grid.axes[static_cast<std::size_t>(j)].size();

    std::vector<int> gidx(static_cast<std::size_t>(d), 0);
    std::vector<double> u(static_cast<std::size_t>(d)), pos(static_cast<std::size_t>(d));
    for (std::size_t f = 0; f < out.values.size(); ++f) {
        bool zero = false;
        for (int j = 0; j < d; ++j) {
            u[static_cast<std::size_t>(j)] =
                grid.axes[static_cast<std::size_t>(j)][static_cast<std::size_t>(gidx[static_cast<std::size_t>(j)])];
            if (u[static_cast<std::size_t>(j)] <= 0.0) zero = true;
            pos[static_cast<std::size_t>(j)] = u[static_cast<std::size_t>(j)] * N;
        }
        if (!zero) {
            const double t1 = atom_term(u) - first_term_smooth.eval(pos);
            const double t2 = second_term.eval(pos);
            out.values[f] = coef * (t1 - t2);
        }
        for (int j = d - 1; j >= 0; --j) {
            if (++gidx[static_cast<std::size_t>(j)] < static_cast<int>(gsize[static_cast<std::size_t>(j)])) break;
            gidx[static_cast<std::size_t>(j)] = 0;
        }
    }
    return out;
}

TestProcessGrid WnTransform::compute(const GridSpec& grid) const {
    if (!have_sample_) throw domain_error("compute: no sample attached");
    const auto& ctx = quad_.context();
    const int d = ctx.dim();
    const int N = quad_.nodes();
    const double rn = std::sqrt(static_cast<double>(n_sample_));

    // B(level) = I^{-1}(z_l) J(z_l), with a conditioning guard
    std::vector<Eigen::VectorXd> B(static_cast<std::size_t>(N));
    for (int l = 0; l < N; ++l) {
        const double z = quad_.cell_mid(l);
        const Eigen::MatrixXd I = quad_.info_at(z);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(I);
        if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() <= 0.0 ||
            es.eigenvalues().maxCoeff() / es.eigenvalues().minCoeff() > opts_.condition_limit)
            throw singular_information("information matrix ill-conditioned at t=" +
                                       std::to_string(z));
        Eigen::LLT<Eigen::MatrixXd> llt(I);
        B[static_cast<std::size_t>(l)] = llt.solve(inner_score_integral(z));
    }

    // first-term smooth prefix: cells of sqrt(n) * sqrt(c) * vol
    std::vector<double> cells(static_cast<std::size_t>(std::pow(N, d)), 0.0);
    {
        const int M = quad_.cells_per_axis();
        std::vector<int> idx(static_cast<std::size_t>(d), 0);
        for (std::size_t flat = 0; flat < quad_.total_nodes(); ++flat) {
            bool inner = true;
            for (int j = 0; j < d; ++j) inner = inner && idx[static_cast<std::size_t>(j)] < N;
            if (inner) {
                std::size_t cflat = 0;
                for (int j = 0; j < d; ++j)
                    cflat = cflat * static_cast<std::size_t>(N) +
                            static_cast<std::size_t>(idx[static_cast<std::size_t>(j)]);
                cells[cflat] = rn * std::sqrt(quad_.density_at(flat)) * quad_.node_volume(flat);
            }
            for (int j = d - 1; j >= 0; --j) {
                if (++idx[static_cast<std::size_t>(j)] < M) break;
                idx[static_cast<std::size_t>(j)] = 0;
            }
        }
    }
    const PrefixField p1(d, N, std::move(cells));

    const double delta = ctx.delta;
    auto atom_term = [this, d, delta, rn](std::span<const double> u) {
        double acc = 0.0;
        for (Eigen::Index i = 0; i < t1_atoms_.rows(); ++i) {
            bool inside = true;
            for (int j = 0; j < d && inside; ++j)
                inside = t1_atoms_(i, j) <= delta + (1.0 - 2.0 * delta) * u[static_cast<std::size_t>(j)];
            if (inside) acc += t1_weights_[static_cast<std::size_t>(i)];
        }
        return rn * acc / static_cast<double>(n_sample_);
    };

    auto out = assemble(grid, p1, atom_term, B);
    out.provenance = "wn";
    return out;
}

TestProcessGrid WnTransform::transform_signal(int signal_index, const GridSpec& grid,
                                              int signal_nodes) const {
    const auto& ctx = quad_.context();
    const int d = ctx.dim();
    const int q = ctx.q();
    if (signal_index < 0 || signal_index >= q)
        throw domain_error("transform_signal: bad signal index");
    const int N = quad_.nodes();

    // the signal measure dK_i = k_i dC is evaluated on its own, finer
    // partition; the transform machinery keeps its own resolution
    ScoreQuadrature sig(ctx, signal_nodes);

    std::vector<Eigen::VectorXd> B(static_cast<std::size_t>(N));
    for (int l = 0; l < N; ++l) {
        const double z = quad_.cell_mid(l);
        const Eigen::VectorXd J_sig = sig.info_at(z).col(signal_index);
        B[static_cast<std::size_t>(l)] = quad_.info_solve(z, J_sig);
    }

    // first term: prefix field of k_i sqrt(c) on the signal partition
    const int K = sig.nodes();
    std::vector<double> cells(static_cast<std::size_t>(std::pow(K, d)), 0.0);
    {
        const int M = sig.cells_per_axis();
        std::vector<int> idx(static_cast<std::size_t>(d), 0);
        for (std::size_t flat = 0; flat < sig.total_nodes(); ++flat) {
            bool inner = true;
            for (int j = 0; j < d; ++j) inner = inner && idx[static_cast<std::size_t>(j)] < K;
            if (inner) {
                std::size_t cflat = 0;
                for (int j = 0; j < d; ++j)
                    cflat = cflat * static_cast<std::size_t>(K) +
                            static_cast<std::size_t>(idx[static_cast<std::size_t>(j)]);
                cells[cflat] = sig.score_at(flat)[static_cast<std::size_t>(signal_index)] *
                               std::sqrt(sig.density_at(flat)) * sig.node_volume(flat);
            }
            for (int j = d - 1; j >= 0; --j) {
                if (++idx[static_cast<std::size_t>(j)] < M) break;
                idx[static_cast<std::size_t>(j)] = 0;
            }
        }
    }
    const PrefixField p1(d, K, std::move(cells));

    auto first_term = [&p1, K, d](std::span<const double> u) {
        std::vector<double> pos(static_cast<std::size_t>(d));
        for (int j = 0; j < d; ++j) pos[static_cast<std::size_t>(j)] = u[static_cast<std::size_t>(j)] * K;
        return p1.eval(pos);
    };

    // assemble with a zero dummy smooth field for the first term (it is
    // already folded into first_term)
    const PrefixField zero(d, 1, std::vector<double>(static_cast<std::size_t>(std::pow(1, d)), 0.0));
    auto out = assemble(grid, zero, first_term, B);
    out.provenance = "signal-K" + std::to_string(signal_index);
    out.sample_size = 0;
    return out;
}

TestProcessGrid compute_wn(const estimation::FittedModel& fitted, const Eigen::MatrixXd& pseudo,
                           double delta, const GridSpec& grid, TransformOptions opts) {
    WnTransform w(ScoreContext::from_fitted(fitted, delta), opts);
    w.set_sample(pseudo);
    return w.compute(grid);
}

} // namespace copgof::transform
