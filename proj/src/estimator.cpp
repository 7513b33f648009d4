#include "gridfase/estimator.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include "gridfase/errors.hpp"

namespace gridfase {

SmoothingCoefficients SmoothingCoefficients::checked(double alpha, double beta) {
    if (!(alpha >= 0.0 && alpha <= 1.0) || !(beta >= 0.0 && beta <= 1.0)) {
        throw std::invalid_argument("smoothing coefficients must lie in [0, 1]");
    }
    return {alpha, beta};
}

HoltMemory HoltMemory::anchored(const Eigen::VectorXd& x0) {
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(x0.size());
    return {x0, x0, zero, zero};
}

HoltTransition holt_fg(SmoothingCoefficients c, const HoltMemory& holt, const Eigen::VectorXd& x_tilde_prev) {
    if (holt.level.size() != x_tilde_prev.size() || holt.trend.size() != x_tilde_prev.size()) {
        throw DimensionMismatch("Holt memory does not match the state dimension");
    }
    const double a = c.alpha, b = c.beta;
    HoltTransition tr;
    tr.f = a * (1.0 + b);
    // on the 0.1 grid use exact decimal arithmetic so that e.g. (0.6, 0.5) gives 0.9, not 0.9 - ulp
    const double ia = std::round(a * 10.0), ib = std::round(b * 10.0);
    if (std::abs(a * 10.0 - ia) < 1e-9 && std::abs(b * 10.0 - ib) < 1e-9) tr.f = ia * (10.0 + ib) / 100.0;
    tr.g = (1.0 + b) * (1.0 - a) * x_tilde_prev - b * holt.level + (1.0 - b) * holt.trend;
    return tr;
}

HoltMemory holt_advance(const HoltMemory& holt, SmoothingCoefficients c, const Eigen::VectorXd& x_hat,
                        const Eigen::VectorXd& x_tilde) {
    HoltMemory next;
    next.level = c.alpha * x_hat + (1.0 - c.alpha) * x_tilde;
    next.trend = c.beta * (next.level - holt.level) + (1.0 - c.beta) * holt.trend;
    next.level_prev = holt.level;
    next.trend_prev = holt.trend;
    return next;
}

Gaussian predict(const Eigen::VectorXd& x, const Eigen::MatrixXd& sigma, const Eigen::MatrixXd& F,
                 const Eigen::VectorXd& G, const Eigen::MatrixXd& Q) {
    return {F * x + G, F * sigma * F.transpose() + Q};
}

Gaussian predict(const Eigen::VectorXd& x, const Eigen::MatrixXd& sigma, const HoltTransition& tr,
                 const Eigen::MatrixXd& Q) {
    return {tr.f * x + tr.g, (tr.f * tr.f) * sigma + Q};
}

namespace {

// Negative eigenvalues down to -tolerance are round-off; all negatives are clamped to zero.
void symmetrize_psd(Eigen::MatrixXd& sigma) {
    sigma = 0.5 * (sigma + sigma.transpose()).eval();
    Eigen::LLT<Eigen::MatrixXd> llt(sigma);
    if (llt.info() == Eigen::Success) return;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sigma);
    Eigen::VectorXd lambda = eig.eigenvalues();
    if (lambda.minCoeff() >= 0.0) return;
    lambda = lambda.cwiseMax(0.0);
    sigma = eig.eigenvectors() * lambda.asDiagonal() * eig.eigenvectors().transpose();
    sigma = 0.5 * (sigma + sigma.transpose()).eval();
}

}  // namespace

Gaussian ekf_update(const Eigen::VectorXd& x_pred, const Eigen::MatrixXd& sigma_pred, const Eigen::VectorXd& y,
                    const Eigen::VectorXd& y_pred, const Eigen::VectorXd& r_diag, const Eigen::MatrixXd& H,
                    const UpdateOptions& options) {
    const Eigen::Index m = H.rows();
    if (H.cols() != x_pred.size() || y.size() != m || y_pred.size() != m || r_diag.size() != m ||
        sigma_pred.rows() != x_pred.size() || sigma_pred.cols() != x_pred.size()) {
        throw DimensionMismatch("EKF update dimensions are inconsistent");
    }
    if ((r_diag.array() <= 0.0).any()) throw SingularInnovation("measurement variances must be positive");

    Eigen::VectorXd dy = y - y_pred;
    for (int row : options.angle_rows) dy[row] = wrap_angle(dy[row]);

    const Eigen::MatrixXd hs = H * sigma_pred;  // H Sigma
    Eigen::MatrixXd s = hs * H.transpose();
    s.diagonal() += r_diag;

    // Factor the Jacobi-scaled innovation covariance; its conditioning is independent of channel units.
    const Eigen::VectorXd d = s.diagonal().cwiseSqrt().cwiseInverse();
    const Eigen::MatrixXd scaled = d.asDiagonal() * s * d.asDiagonal();
    Eigen::LLT<Eigen::MatrixXd> llt(scaled);
    if (llt.info() != Eigen::Success) throw SingularInnovation("innovation covariance is not positive definite");
    const double rcond = llt.rcond();
    if (!(rcond > 0.0) || 1.0 / rcond > options.condition_limit) {
        throw SingularInnovation("innovation covariance condition number exceeds " +
                                 std::to_string(options.condition_limit));
    }

    // K^T = S^-1 H Sigma = D scaled^-1 D H Sigma
    const Eigen::MatrixXd kt = d.asDiagonal() * llt.solve(d.asDiagonal() * hs);
    Gaussian out;
    out.mean = x_pred + kt.transpose() * dy;
    out.cov = sigma_pred - kt.transpose() * hs;  // K S K^T = K H Sigma
    symmetrize_psd(out.cov);
    return out;
}

Gaussian ekf_update(const Eigen::VectorXd& x_pred, const Eigen::MatrixXd& sigma_pred, const Eigen::VectorXd& y,
                    const Eigen::VectorXd& r_diag, const Eigen::MatrixXd& H, const UpdateOptions& options) {
    return ekf_update(x_pred, sigma_pred, y, H * x_pred, r_diag, H, options);
}

FilterState FilterState::anchored(const Eigen::VectorXd& x0, const FilterConfig& config, int t) {
    FilterState fs;
    fs.x_hat = x0;
    fs.x_tilde = x0;
    fs.sigma = config.sigma0 * Eigen::MatrixXd::Identity(x0.size(), x0.size());
    fs.holt = HoltMemory::anchored(x0);
    fs.t = t;
    return fs;
}

WlsResult wls_static(const MeasurementModel& model, const Snapshot& snapshot, const FilterConfig& config) {
    if (!snapshot.slow_refreshed) throw std::invalid_argument("static estimation needs a fully refreshed snapshot");
    const int m = model.size();
    const int n = model.state_dim();
    if (snapshot.fast_values.size() != model.fast_count() || snapshot.slow_values.size() != model.slow_count()) {
        throw DimensionMismatch("snapshot does not match the measurement model");
    }

    Eigen::VectorXd z(m), w(m);
    z << snapshot.fast_values, snapshot.slow_values;
    Eigen::VectorXd var(m);
    var << snapshot.fast_variances, snapshot.slow_variances;
    w = var.cwiseSqrt().cwiseInverse();

    SystemState x = SystemState::flat(model.network());
    for (int iter = 1; iter <= config.wls_max_iter; ++iter) {
        Eigen::VectorXd r = z - model.h_full(x);
        for (int i = 0; i < m; ++i) {
            if (model.is_angle(i)) r[i] = wrap_angle(r[i]);
        }
        const Eigen::MatrixXd a = w.asDiagonal() * model.jacobian(x);
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
        qr.setThreshold(config.rank_tolerance);
        if (qr.rank() < n) {
            throw RankDeficient("measurement set does not observe the state (gain rank " + std::to_string(qr.rank()) +
                                " of " + std::to_string(n) + ")");
        }
        const Eigen::VectorXd dx = qr.solve(w.cwiseProduct(r));
        x.x() += dx;
        if (dx.cwiseAbs().maxCoeff() < config.wls_tolerance) return {x, iter};
    }
    throw NonConvergence("static estimation did not converge in " + std::to_string(config.wls_max_iter) +
                             " iterations",
                         0.0, config.wls_max_iter);
}

Eigen::VectorXd reconstruct_slow(const MeasurementModel& model, const Eigen::VectorXd& x_tilde) {
    return model.h_slow(SystemState(x_tilde));
}

FaseEstimator::FaseEstimator(std::shared_ptr<const MeasurementModel> model, FilterConfig config)
    : model_(std::move(model)), config_(config) {
    if (!(config_.q > 0.0)) throw std::invalid_argument("process noise q must be positive");
    if (!(config_.sigma0 > 0.0)) throw std::invalid_argument("initial covariance must be positive");
    const int n = model_->state_dim();
    process_noise_ = config_.q * Eigen::MatrixXd::Identity(n, n);
    update_options_.condition_limit = config_.condition_limit;
    for (int i = 0; i < model_->size(); ++i) {
        if (model_->is_angle(i)) update_options_.angle_rows.push_back(i);
    }
}

void FaseEstimator::anchor(const Snapshot& snapshot) {
    const WlsResult wls = wls_static(*model_, snapshot, config_);
    state_ = FilterState::anchored(wls.state.x(), config_, snapshot.t);
    anchored_ = true;
}

void FaseEstimator::step(const Snapshot& snapshot, SmoothingCoefficients c) {
    if (!anchored_) throw std::logic_error("FASE step before the first static anchor");
    const HoltTransition tr = holt_fg(c, state_.holt, state_.x_tilde);
    const Gaussian pred = predict(state_.x_hat, state_.sigma, tr, process_noise_);
    state_.holt = holt_advance(state_.holt, c, state_.x_hat, state_.x_tilde);

    const SystemState predicted(pred.mean);
    const Eigen::VectorXd d_hat = model_->h_slow(predicted);
    const int m = model_->size();

    Eigen::VectorXd y(m), y_pred(m), r(m);
    y << snapshot.fast_values, d_hat;
    y_pred << model_->h_fast(predicted), d_hat;
    r << snapshot.fast_variances, snapshot.slow_variances;

    const Gaussian upd = ekf_update(pred.mean, pred.cov, y, y_pred, r, model_->jacobian(predicted), update_options_);
    state_.x_tilde = pred.mean;
    state_.x_hat = upd.mean;
    state_.sigma = upd.cov;
    state_.t = snapshot.t;
}

}  // namespace gridfase
