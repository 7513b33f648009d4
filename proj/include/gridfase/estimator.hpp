#pragma once

#include <memory>
#include <vector>

#include <Eigen/Core>

#include "gridfase/telemetry.hpp"

namespace gridfase {

/// Holt level (alpha) and trend (beta) smoothing coefficients, both in [0, 1].
struct SmoothingCoefficients {
    double alpha = 0.6;
    double beta = 0.5;

    /// Throws std::invalid_argument outside the unit square.
    static SmoothingCoefficients checked(double alpha, double beta);

    friend bool operator==(const SmoothingCoefficients&, const SmoothingCoefficients&) = default;
};

/// Holt recursion memory. `level`/`trend` are the most recently computed a and b;
/// `level_prev`/`trend_prev` the ones before them.
struct HoltMemory {
    Eigen::VectorXd level;
    Eigen::VectorXd level_prev;
    Eigen::VectorXd trend;
    Eigen::VectorXd trend_prev;

    /// Persistence-neutral start: both levels at x0, both trends zero.
    static HoltMemory anchored(const Eigen::VectorXd& x0);
};

/// Holt prediction written as x_pred = F x_hat + G with F = f I.
struct HoltTransition {
    double f = 1.0;
    Eigen::VectorXd g;

    Eigen::MatrixXd F() const { return f * Eigen::MatrixXd::Identity(g.size(), g.size()); }
};

/// F = alpha (1 + beta) I,  G = (1 + beta)(1 - alpha) x_tilde_prev - beta a + (1 - beta) b,
/// with a, b the latest level and trend in `holt`.
HoltTransition holt_fg(SmoothingCoefficients c, const HoltMemory& holt, const Eigen::VectorXd& x_tilde_prev);

/// New level alpha x_hat + (1 - alpha) x_tilde, new trend beta (level - old level) + (1 - beta) old trend;
/// the previous level/trend shift into the *_prev slots.
HoltMemory holt_advance(const HoltMemory& holt, SmoothingCoefficients c, const Eigen::VectorXd& x_hat,
                        const Eigen::VectorXd& x_tilde);

struct Gaussian {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
};

/// x' = F x + G,  Sigma' = F Sigma F^T + Q.
Gaussian predict(const Eigen::VectorXd& x, const Eigen::MatrixXd& sigma, const Eigen::MatrixXd& F,
                 const Eigen::VectorXd& G, const Eigen::MatrixXd& Q);
Gaussian predict(const Eigen::VectorXd& x, const Eigen::MatrixXd& sigma, const HoltTransition& tr,
                 const Eigen::MatrixXd& Q);

struct UpdateOptions {
    double condition_limit = 1e12;
    std::vector<int> angle_rows;  ///< innovations on these rows are wrapped into (-pi, pi]
};

/// Kalman correction with innovation y - y_pred:
///   S = H Sigma H^T + diag(r),  K = Sigma H^T S^-1,  x = x_pred + K dy,  Sigma' = Sigma - K S K^T.
/// Sigma' is symmetrized and negative eigenvalues are clamped to zero.
/// Throws SingularInnovation when the Jacobi-scaled S has condition number above the limit.
Gaussian ekf_update(const Eigen::VectorXd& x_pred, const Eigen::MatrixXd& sigma_pred, const Eigen::VectorXd& y,
                    const Eigen::VectorXd& y_pred, const Eigen::VectorXd& r_diag, const Eigen::MatrixXd& H,
                    const UpdateOptions& options = {});

/// Linear measurement model: y_pred = H x_pred.
Gaussian ekf_update(const Eigen::VectorXd& x_pred, const Eigen::MatrixXd& sigma_pred, const Eigen::VectorXd& y,
                    const Eigen::VectorXd& r_diag, const Eigen::MatrixXd& H, const UpdateOptions& options = {});

struct FilterConfig {
    double q = 1e-6;       ///< process noise, Q = q I
    double sigma0 = 1e-4;  ///< covariance after every static anchor, Sigma = sigma0 I
    double wls_tolerance = 1e-8;
    int wls_max_iter = 50;
    double rank_tolerance = 1e-10;  ///< relative pivot threshold for observability
    double condition_limit = 1e12;
};

struct FilterState {
    Eigen::VectorXd x_hat;    ///< filtered estimate
    Eigen::VectorXd x_tilde;  ///< latest prediction
    Eigen::MatrixXd sigma;
    HoltMemory holt;
    int t = 0;

    static FilterState anchored(const Eigen::VectorXd& x0, const FilterConfig& config, int t);
};

struct WlsResult {
    SystemState state;
    int iterations = 0;
};

/// Static Gauss-Newton WLS from a flat start on a fully refreshed snapshot.
/// Throws RankDeficient when the measurement set does not observe the state and
/// NonConvergence when the iteration cap is hit.
WlsResult wls_static(const MeasurementModel& model, const Snapshot& snapshot, const FilterConfig& config);

/// Slow channels re-evaluated at the predicted state, standing in for stale readings.
Eigen::VectorXd reconstruct_slow(const MeasurementModel& model, const Eigen::VectorXd& x_tilde);

/// Forecasting-aided estimator: a static WLS anchor at every synchronized step and
/// Holt-predict / EKF-update steps in between.
class FaseEstimator {
public:
    FaseEstimator(std::shared_ptr<const MeasurementModel> model, FilterConfig config);

    const MeasurementModel& model() const { return *model_; }
    const FilterConfig& config() const { return config_; }
    const FilterState& state() const { return state_; }
    bool anchored() const { return anchored_; }

    /// Synchronized branch: WLS solve, then covariance and Holt memory are re-anchored at the solution.
    void anchor(const Snapshot& snapshot);

    /// Intermediate branch: predict with the given coefficients, reconstruct the slow channels at the
    /// prediction, and correct with the fresh fast channels stacked over the reconstruction.
    void step(const Snapshot& snapshot, SmoothingCoefficients c);

private:
    std::shared_ptr<const MeasurementModel> model_;
    FilterConfig config_;
    FilterState state_;
    Eigen::MatrixXd process_noise_;
    UpdateOptions update_options_;
    bool anchored_ = false;
};

}  // namespace gridfase
