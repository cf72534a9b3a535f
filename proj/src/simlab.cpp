#include "forkpath/simlab.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>
#include <sstream>

#include "forkpath/error.hpp"
#include "forkpath/parallel.hpp"
#include "forkpath/stats.hpp"

namespace forkpath::simlab {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

std::mt19937_64 world_rng(std::uint64_t seed, std::uint64_t world) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(world), static_cast<std::uint32_t>(world >> 32)};
    return std::mt19937_64(seq);
}

std::string rho_text(double rho) {
    std::ostringstream s;
    s << rho;
    return s.str();
}

}  // namespace

void DgpConfig::validate(std::size_t paths) const {
    if (!(sigma_b >= 0) || !(sigma_e >= 0)) throw ValidationError("sigma_b and sigma_e must be non-negative");
    if (alpha.size() != 1 && alpha.size() != paths) throw ValidationError("alpha needs one value or one per path");
    if (lengths.size() != 1 && lengths.size() != paths)
        throw ValidationError("lengths need one value or one per path");
    for (double a : alpha)
        if (!(a >= 0 && a <= 1)) throw ValidationError("alpha must lie in [0, 1]");
    for (auto n : lengths)
        if (n < 2) throw ValidationError("path lengths must be at least 2");
    if (rho && !(*rho >= -1 && *rho <= 1)) throw ValidationError("rho must lie in [-1, 1]");
}

DgpConfig DgpConfig::from_json(const nlohmann::json& j) {
    DgpConfig c;
    c.b_bar = j.value("b_bar", c.b_bar);
    c.sigma_b = j.value("sigma_b", c.sigma_b);
    c.sigma_e = j.value("sigma_e", c.sigma_e);
    if (j.contains("alpha")) {
        const auto& a = j.at("alpha");
        c.alpha = a.is_array() ? a.get<std::vector<double>>() : std::vector<double>{a.get<double>()};
    }
    if (j.contains("lengths")) {
        const auto& a = j.at("lengths");
        c.lengths = a.is_array() ? a.get<std::vector<std::size_t>>() : std::vector<std::size_t>{a.get<std::size_t>()};
    }
    if (j.contains("rho") && !j.at("rho").is_null()) c.rho = j.at("rho").get<double>();
    c.seed = j.value("seed", c.seed);
    c.keep_data = j.value("keep_data", c.keep_data);
    return c;
}

nlohmann::json DgpConfig::to_json() const {
    return {{"b_bar", b_bar},   {"sigma_b", sigma_b},
            {"sigma_e", sigma_e}, {"alpha", alpha},
            {"lengths", lengths}, {"rho", rho ? nlohmann::json(*rho) : nlohmann::json()},
            {"seed", seed},     {"keep_data", keep_data}};
}

MatrixXd noise_correlation(const DgpConfig& c, const pathgrid::StudySpec& spec) {
    const auto P = static_cast<std::size_t>(spec.path_count());
    c.validate(P);
    MatrixXd C = MatrixXd::Identity(static_cast<long>(P), static_cast<long>(P));
    if (!c.rho) return C;
    const double rho = *c.rho, vb = c.sigma_b * c.sigma_b, ve = c.sigma_e * c.sigma_e;
    std::vector<pathgrid::PathAssignment> paths;
    paths.reserve(P);
    for (std::uint64_t i = 0; i < P; ++i) paths.push_back(spec.assignment(i));
    std::vector<double> s(P);
    for (std::size_t p = 0; p < P; ++p) {
        const double a = c.alpha_of(p);
        s[p] = std::sqrt(a * a * vb + (1 - a) * (1 - a) * ve);
    }
    for (std::size_t p = 0; p < P; ++p) {
        for (std::size_t q = p + 1; q < P; ++q) {
            const double ap = c.alpha_of(p), aq = c.alpha_of(q);
            const double target = std::pow(rho, static_cast<double>(pathgrid::path_distance(paths[p], paths[q])));
            const double denom = (1 - ap) * (1 - aq) * ve;
            const double resid = target * s[p] * s[q] - ap * aq * vb;
            double v = 0;
            if (denom > 0) {
                v = resid / denom;
            } else if (std::abs(resid) > 1e-12 * std::max(1.0, s[p] * s[q])) {
                throw DomainError("correlation target rho = " + rho_text(rho) +
                                  " is unreachable: a path has no noise component");
            }
            if (std::abs(v) > 1 + 1e-12)
                throw DomainError("correlation target rho = " + rho_text(rho) +
                                  " needs a noise correlation outside [-1, 1]");
            C(static_cast<long>(p), static_cast<long>(q)) = C(static_cast<long>(q), static_cast<long>(p)) = v;
        }
    }
    return C;
}

PathSimulator::PathSimulator(DgpConfig config, const pathgrid::StudySpec& spec)
    : config_(std::move(config)), paths_(static_cast<std::size_t>(spec.path_count())) {
    const MatrixXd C = noise_correlation(config_, spec);
    independent_ = !config_.rho;
    if (independent_) return;
    Eigen::LLT<MatrixXd> llt(C);
    if (llt.info() == Eigen::Success) {
        factor_ = llt.matrixL();
        return;
    }
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(C);
    const VectorXd ev = eig.eigenvalues();
    if (ev.minCoeff() < -1e-9 * std::max(1.0, ev.maxCoeff()))
        throw DomainError("noise correlation for rho = " + rho_text(*config_.rho) +
                          " is not positive semi-definite (smallest eigenvalue " + rho_text(ev.minCoeff()) + ")");
    factor_ = eig.eigenvectors() * ev.cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

SimWorld PathSimulator::world(std::uint64_t w) const {
    auto rng = world_rng(config_.seed, w);
    std::normal_distribution<double> g;
    SimWorld out;
    out.b_tilde = config_.sigma_b * g(rng);
    VectorXd z(static_cast<long>(paths_));
    for (auto& v : z) v = g(rng);
    const VectorXd e = config_.sigma_e * (independent_ ? z : VectorXd(factor_ * z));
    out.e.assign(e.data(), e.data() + e.size());
    out.b_hat.resize(paths_);
    if (config_.keep_data) out.data.resize(paths_);
    for (std::size_t p = 0; p < paths_; ++p) {
        const double a = config_.alpha_of(p);
        const double slope = config_.b_bar + a * out.b_tilde;
        if (!config_.keep_data) {
            out.b_hat[p] = slope + (1 - a) * out.e[p];
            continue;
        }
        // eps = X e_p + (noise orthogonal to X), so the OLS noise is e_p exactly
        const auto T = static_cast<long>(config_.length_of(p));
        VectorXd x(T), u(T);
        for (auto& v : x) v = g(rng);
        for (auto& v : u) v = g(rng);
        const double xx = x.squaredNorm();
        u -= x * (x.dot(u) / xx);
        const VectorXd eps = x * out.e[p] + u;
        const VectorXd y = x * slope + (1 - a) * eps;
        out.b_hat[p] = x.dot(y) / xx;
        out.data[p].x.assign(x.data(), x.data() + T);
        out.data[p].y.assign(y.data(), y.data() + T);
    }
    return out;
}

MatrixXd PathSimulator::estimates(std::size_t worlds, unsigned jobs) const {
    MatrixXd B(static_cast<long>(worlds), static_cast<long>(paths_));
    parallel_for(worlds, jobs, [&](std::size_t w) {
        const auto sw = world(w);
        for (std::size_t p = 0; p < paths_; ++p) B(static_cast<long>(w), static_cast<long>(p)) = sw.b_hat[p];
    });
    return B;
}

SimWorld simulate_paths(const DgpConfig& config, const pathgrid::StudySpec& spec) {
    return PathSimulator(config, spec).world(0);
}

std::vector<double> correlated_outcomes(std::span<const std::size_t> radices, double rho, std::uint64_t seed,
                                        std::uint64_t world) {
    if (!(rho >= 0 && rho <= 1)) throw DomainError("rho must lie in [0, 1] for the Kronecker kernel");
    std::size_t P = 1;
    for (auto r : radices) P *= r;
    auto rng = world_rng(seed, world);
    std::normal_distribution<double> g;
    std::vector<double> z(P);
    for (auto& v : z) v = g(rng);
    // layer j's factor: Cholesky of rho 11' + (1 - rho) I, applied along axis j
    std::size_t stride = P;
    for (std::size_t j = 0; j < radices.size(); ++j) {
        const std::size_t r = radices[j];
        stride /= r;
        const MatrixXd M = rho * MatrixXd::Ones(static_cast<long>(r), static_cast<long>(r)) +
                           (1 - rho) * MatrixXd::Identity(static_cast<long>(r), static_cast<long>(r));
        MatrixXd L;
        Eigen::LLT<MatrixXd> llt(M);
        if (llt.info() == Eigen::Success) {
            L = llt.matrixL();
        } else {
            Eigen::SelfAdjointEigenSolver<MatrixXd> eig(M);
            L = eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
        }
        VectorXd fibre(static_cast<long>(r));
        for (std::size_t base = 0; base < P; ++base) {
            if ((base / stride) % r != 0) continue;
            for (std::size_t k = 0; k < r; ++k) fibre(static_cast<long>(k)) = z[base + k * stride];
            const VectorXd y = L * fibre;
            for (std::size_t k = 0; k < r; ++k) z[base + k * stride] = y(static_cast<long>(k));
        }
    }
    return z;
}

std::vector<double> default_x_grid() {
    std::vector<double> x;
    for (int i = -30; i <= 30; ++i) x.push_back(i / 10.0);
    return x;
}

ConvergencePoint convergence_diagnostic(std::span<const std::size_t> radices, double rho, std::size_t worlds,
                                        std::uint64_t seed, unsigned jobs, std::span<const double> x_grid) {
    if (worlds < 2) throw DomainError("convergence diagnostic needs at least two worlds");
    const std::vector<double> grid = x_grid.empty() ? default_x_grid() : std::vector<double>(x_grid.begin(), x_grid.end());
    ConvergencePoint pt;
    pt.radices.assign(radices.begin(), radices.end());
    pt.paths = 1;
    for (auto r : radices) pt.paths *= r;
    pt.rho = rho;
    pt.worlds = worlds;
    const std::size_t X = grid.size();
    std::vector<double> phi(X);
    for (std::size_t i = 0; i < X; ++i) phi[i] = stats::normal_cdf(grid[i]);
    MatrixXd sq(static_cast<long>(worlds), static_cast<long>(X));
    parallel_for(worlds, jobs, [&](std::size_t w) {
        auto z = correlated_outcomes(radices, rho, seed, w);
        std::sort(z.begin(), z.end());
        for (std::size_t i = 0; i < X; ++i) {
            const auto below = std::upper_bound(z.begin(), z.end(), grid[i]) - z.begin();
            const double d = phi[i] - static_cast<double>(below) / static_cast<double>(z.size());
            sq(static_cast<long>(w), static_cast<long>(i)) = d * d;
        }
    });
    for (std::size_t i = 0; i < X; ++i) {
        const VectorXd col = sq.col(static_cast<long>(i));
        const double m = col.mean();
        if (i == 0 || m > pt.sup_mse) {
            pt.sup_mse = m;
            pt.argmax_x = grid[i];
            const double var = (col.array() - m).square().sum() / static_cast<double>(worlds - 1);
            pt.mse_se = std::sqrt(var / static_cast<double>(worlds));
        }
    }
    pt.sigma_norm = pathgrid::sigma_norm(radices, rho);
    pt.bound = 1.0 / (4.0 * static_cast<double>(pt.paths)) + pt.sigma_norm;
    return pt;
}

nlohmann::json ConvergencePoint::to_json() const {
    return {{"radices", radices}, {"paths", paths},       {"rho", rho},       {"worlds", worlds},
            {"sup_mse", sup_mse}, {"mse_se", mse_se},     {"argmax_x", argmax_x},
            {"sigma_norm", sigma_norm}, {"bound_c1", bound}};
}

void write_convergence_csv(std::ostream& out, const std::vector<ConvergencePoint>& curve) {
    out << "layers,radices,paths,rho,worlds,sup_mse,mse_se,argmax_x,sigma_norm,bound_c1\n";
    for (const auto& p : curve) {
        std::string r;
        for (std::size_t i = 0; i < p.radices.size(); ++i) r += (i ? "x" : "") + std::to_string(p.radices[i]);
        out << p.radices.size() << ',' << r << ',' << p.paths << ',' << p.rho << ',' << p.worlds << ',' << p.sup_mse
            << ',' << p.mse_se << ',' << p.argmax_x << ',' << p.sigma_norm << ',' << p.bound << '\n';
    }
}

}  // namespace forkpath::simlab
