#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "forkpath/pathgrid.hpp"

namespace forkpath::simlab {

/// b_p = b_bar + alpha_p b~ + (1 - alpha_p) e_p with b~ ~ N(0, sigma_b^2)
/// shared by all paths and e_p the path's OLS noise, sd sigma_e.
struct DgpConfig {
    double b_bar = 0;
    double sigma_b = 1;
    double sigma_e = 1;
    std::vector<double> alpha{0.5};         // one per path, or one value for all
    std::vector<std::size_t> lengths{60};   // sample length per path, or one for all
    std::optional<double> rho;              // target Cor(b_p, b_q) = rho^d(p,q); independent noise if empty
    std::uint64_t seed = 1;
    bool keep_data = false;                 // materialize (X_p, Y_p)

    void validate(std::size_t paths) const;
    [[nodiscard]] double alpha_of(std::size_t p) const { return alpha.size() == 1 ? alpha[0] : alpha[p]; }
    [[nodiscard]] std::size_t length_of(std::size_t p) const { return lengths.size() == 1 ? lengths[0] : lengths[p]; }
    [[nodiscard]] static DgpConfig from_json(const nlohmann::json& j);
    [[nodiscard]] nlohmann::json to_json() const;
};

struct PathData {
    std::vector<double> x, y;
};

struct SimWorld {
    double b_tilde = 0;
    std::vector<double> e;      // per-path OLS noise
    std::vector<double> b_hat;  // per-path estimate
    std::vector<PathData> data; // filled when keep_data
};

/// Noise correlation Cor(e_p, e_q) that makes Cor(b_p, b_q) = rho^d exactly,
/// or the identity when no rho is set. Entries for paths with alpha = 1 are
/// left at the identity.
[[nodiscard]] Eigen::MatrixXd noise_correlation(const DgpConfig& config, const pathgrid::StudySpec& spec);

class PathSimulator {
public:
    /// Throws DomainError naming rho when the noise correlation is not PSD.
    PathSimulator(DgpConfig config, const pathgrid::StudySpec& spec);

    [[nodiscard]] std::size_t paths() const { return paths_; }
    [[nodiscard]] const DgpConfig& config() const { return config_; }
    /// World `w` from its own stream; identical for any thread or order.
    [[nodiscard]] SimWorld world(std::uint64_t w) const;
    /// W x P matrix of b_hat over worlds 0..W-1.
    [[nodiscard]] Eigen::MatrixXd estimates(std::size_t worlds, unsigned jobs = 1) const;

private:
    DgpConfig config_;
    std::size_t paths_ = 0;
    Eigen::MatrixXd factor_;  // noise_correlation = factor factor'
    bool independent_ = true;
};

[[nodiscard]] SimWorld simulate_paths(const DgpConfig& config, const pathgrid::StudySpec& spec);

/// Standard Gaussian outcomes over a full grid with Cor = rho^d, sampled
/// through the per-layer Kronecker factors of the kernel.
[[nodiscard]] std::vector<double> correlated_outcomes(std::span<const std::size_t> radices, double rho,
                                                      std::uint64_t seed, std::uint64_t world);

struct ConvergencePoint {
    std::vector<std::size_t> radices;
    std::size_t paths = 0;
    double rho = 0;
    std::size_t worlds = 0;
    double sup_mse = 0;   // max over the x grid of mean (Phi(x) - F_P(x))^2
    double mse_se = 0;    // Monte-Carlo se at the maximizing x
    double argmax_x = 0;
    double sigma_norm = 0;
    double bound = 0;     // 1/(4P) + sigma_norm, constant taken as 1

    [[nodiscard]] nlohmann::json to_json() const;
};

[[nodiscard]] std::vector<double> default_x_grid();
[[nodiscard]] ConvergencePoint convergence_diagnostic(std::span<const std::size_t> radices, double rho,
                                                      std::size_t worlds, std::uint64_t seed, unsigned jobs = 1,
                                                      std::span<const double> x_grid = {});
void write_convergence_csv(std::ostream& out, const std::vector<ConvergencePoint>& curve);

}  // namespace forkpath::simlab
