#pragma once

// Multivariate partial least squares (PLS2) with z-scored predictors and
// responses, leave-one-row-out cross-validation, and component selection.
//
// Component a uses the weight vector w_a = dominant left singular vector of
// E_a^T Y (E_a is the deflated predictor matrix), scores t_a = E_a w_a,
// loadings p_a = E_a^T t_a / t_a^T t_a and q_a = Y^T t_a / t_a^T t_a, then
// deflation E_{a+1} = E_a - t_a p_a^T. Coefficients in standardized space are
// B = W (P^T W)^{-1} Q^T. Each w_a is signed so that its largest-magnitude
// entry is positive.

#include <wordorder/errors.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace wordorder::pls {

using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;

struct Standardization {
    RowVectorXd mean;
    RowVectorXd sd;

    /// Sample statistics (n - 1 denominator). Throws on a zero-variance column.
    static Standardization of(const MatrixXd& m, const std::vector<std::string>& names = {}, const char* what = "column") {
        if (m.rows() < 2) throw DataError("standardization needs at least 2 rows");
        Standardization s;
        s.mean = m.colwise().mean();
        s.sd = ((m.rowwise() - s.mean).array().square().colwise().sum() / static_cast<double>(m.rows() - 1)).sqrt();
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            const double scale = std::max(1.0, std::abs(s.mean(j)));
            if (!(s.sd(j) > 1e-12 * scale)) {
                const std::string name =
                    static_cast<std::size_t>(j) < names.size() ? names[static_cast<std::size_t>(j)] : std::to_string(j);
                throw DataError(std::string("zero-variance ") + what + " '" + name + "'");
            }
        }
        return s;
    }

    MatrixXd apply(const MatrixXd& m) const { return (m.rowwise() - mean).array().rowwise() / sd.array(); }
    MatrixXd revert(const MatrixXd& z) const { return (z.array().rowwise() * sd.array()).rowwise() + mean.array(); }
};

struct PlsModel {
    int components = 0;  // effective number extracted (may be below the request on rank-deficient data)
    Standardization x_std;
    Standardization y_std;
    MatrixXd x_weights;    // p x k  (W)
    MatrixXd x_loadings;   // p x k  (P)
    MatrixXd y_loadings;   // m x k  (Q)
    MatrixXd x_rotations;  // p x k  (W (P^T W)^{-1}), maps standardized X to scores
    MatrixXd scores;       // n x k  (T)
    MatrixXd coefficients; // p x m, standardized space
};

/// Fits k components. Requires 0 <= k <= min(rows - 1, predictors).
inline PlsModel fit(const MatrixXd& X, const MatrixXd& Y, int k, const std::vector<std::string>& predictor_names = {}) {
    if (X.rows() != Y.rows()) throw DataError("pls fit: X and Y have different row counts");
    if (X.rows() < 2) throw DataError("pls fit: need at least 2 rows");
    const int max_k = static_cast<int>(std::min<Eigen::Index>(X.rows() - 1, X.cols()));
    if (k < 0 || k > max_k) {
        throw UsageError("pls fit: k = " + std::to_string(k) + " outside [0, " + std::to_string(max_k) + "]");
    }
    PlsModel m;
    m.x_std = Standardization::of(X, predictor_names, "predictor");
    m.y_std = Standardization::of(Y, {}, "response");
    const MatrixXd Ys = m.y_std.apply(Y);
    MatrixXd E = m.x_std.apply(X);
    const Eigen::Index n = X.rows(), p = X.cols(), r = Y.cols();

    m.x_weights.resize(p, k);
    m.x_loadings.resize(p, k);
    m.y_loadings.resize(r, k);
    m.scores.resize(n, k);
    double first_sv = 0.0;
    int a = 0;
    for (; a < k; ++a) {
        const MatrixXd cross = E.transpose() * Ys;
        Eigen::JacobiSVD<MatrixXd> svd(cross, Eigen::ComputeThinU);
        const double sv = svd.singularValues()(0);
        if (a == 0) first_sv = sv;
        if (!(sv > 1e-10 * std::max(first_sv, 1e-300))) break;  // no covariance left
        VectorXd w = svd.matrixU().col(0);
        Eigen::Index imax = 0;
        w.cwiseAbs().maxCoeff(&imax);
        if (w(imax) < 0) w = -w;
        const VectorXd t = E * w;
        const double tt = t.squaredNorm();
        if (!(tt > 0.0)) break;
        const VectorXd pl = E.transpose() * t / tt;
        const VectorXd ql = Ys.transpose() * t / tt;
        E -= t * pl.transpose();
        m.x_weights.col(a) = w;
        m.x_loadings.col(a) = pl;
        m.y_loadings.col(a) = ql;
        m.scores.col(a) = t;
    }
    m.components = a;
    m.x_weights.conservativeResize(p, a);
    m.x_loadings.conservativeResize(p, a);
    m.y_loadings.conservativeResize(r, a);
    m.scores.conservativeResize(n, a);
    if (a > 0) {
        const MatrixXd ptw = m.x_loadings.transpose() * m.x_weights;
        m.x_rotations = m.x_weights * ptw.partialPivLu().inverse();
        m.coefficients = m.x_rotations * m.y_loadings.transpose();
    } else {
        m.x_rotations = MatrixXd::Zero(p, 0);
        m.coefficients = MatrixXd::Zero(p, r);
    }
    return m;
}

inline MatrixXd predict(const PlsModel& m, const MatrixXd& X_new) {
    if (X_new.cols() != m.x_std.mean.size()) throw DataError("pls predict: wrong number of predictors");
    return m.y_std.revert(m.x_std.apply(X_new) * m.coefficients);
}

/// Scores of new rows in the latent space.
inline MatrixXd transform(const PlsModel& m, const MatrixXd& X_new) { return m.x_std.apply(X_new) * m.x_rotations; }

/// 1 - SSE/SST over all entries, SST around `reference` (one value per column).
inline double r_squared(const MatrixXd& Y, const MatrixXd& Y_hat, const RowVectorXd& reference) {
    const double sse = (Y - Y_hat).squaredNorm();
    const double sst = (Y.rowwise() - reference).squaredNorm();
    if (sst == 0.0) return sse == 0.0 ? 1.0 : -std::numeric_limits<double>::infinity();
    return 1.0 - sse / sst;
}

struct CrossValidation {
    int components = 0;
    MatrixXd predictions;    // n x m, each row predicted by the fold without it
    MatrixXd fold_means;     // n x m, training-fold column means of Y
    VectorXd row_r2;         // per left-out row (across response columns)
    VectorXd column_r2;      // per response column (across rows)
    double overall_r2 = 0.0;
};

/// Leave-one-row-out cross-validation. SST uses the training-fold mean of each
/// held-out column, so predictors worse than that mean get negative R^2.
inline CrossValidation loo_cv(const MatrixXd& X, const MatrixXd& Y, int k,
                              const std::vector<std::string>& predictor_names = {}) {
    const Eigen::Index n = X.rows();
    if (n < 3) throw DataError("loo_cv needs at least 3 rows");
    if (Y.rows() != n) throw DataError("loo_cv: X and Y have different row counts");
    CrossValidation cv;
    cv.components = k;
    cv.predictions.resize(n, Y.cols());
    cv.fold_means.resize(n, Y.cols());
    MatrixXd Xtr(n - 1, X.cols()), Ytr(n - 1, Y.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index src = 0, dst = 0; src < n; ++src) {
            if (src == i) continue;
            Xtr.row(dst) = X.row(src);
            Ytr.row(dst) = Y.row(src);
            ++dst;
        }
        const auto model = fit(Xtr, Ytr, k, predictor_names);
        cv.predictions.row(i) = predict(model, X.row(i));
        cv.fold_means.row(i) = Ytr.colwise().mean();
    }
    const MatrixXd err = (Y - cv.predictions).array().square();
    const MatrixXd dev = (Y - cv.fold_means).array().square();
    cv.row_r2 = (1.0 - err.rowwise().sum().array() / dev.rowwise().sum().array()).matrix();
    cv.column_r2 = (1.0 - err.colwise().sum().array() / dev.colwise().sum().array()).matrix().transpose();
    cv.overall_r2 = 1.0 - err.sum() / dev.sum();
    return cv;
}

struct ComponentSelection {
    int best = 1;
    std::vector<double> overall_r2;  // index k-1
};

/// Argmax of LOO-CV overall R^2 over k = 1..k_max (capped by what every fold
/// supports). Values within 1e-9 of the current best count as ties and keep
/// the smaller k.
inline ComponentSelection select_components(const MatrixXd& X, const MatrixXd& Y, int k_max,
                                            const std::vector<std::string>& predictor_names = {}) {
    if (k_max < 1) throw UsageError("select_components: k_max must be >= 1");
    const int cap = static_cast<int>(std::min<Eigen::Index>(X.rows() - 2, X.cols()));
    if (cap < 1) throw DataError("select_components: too few rows for cross-validation");
    const int top = std::min(k_max, cap);
    ComponentSelection sel;
    double best = -std::numeric_limits<double>::infinity();
    for (int k = 1; k <= top; ++k) {
        const double r2 = loo_cv(X, Y, k, predictor_names).overall_r2;
        sel.overall_r2.push_back(r2);
        if (r2 > best + 1e-9) {
            best = r2;
            sel.best = k;
        }
    }
    return sel;
}

/// Pearson correlations between columns.
inline MatrixXd correlation_matrix(const MatrixXd& X, const std::vector<std::string>& names = {}) {
    const auto s = Standardization::of(X, names, "predictor");
    const MatrixXd Z = s.apply(X);
    MatrixXd C = Z.transpose() * Z / static_cast<double>(X.rows() - 1);
    for (Eigen::Index i = 0; i < C.rows(); ++i) {
        C(i, i) = 1.0;
        for (Eigen::Index j = 0; j < i; ++j) {
            const double v = std::clamp(0.5 * (C(i, j) + C(j, i)), -1.0, 1.0);
            C(i, j) = C(j, i) = v;
        }
    }
    return C;
}

// --- labelled tables -------------------------------------------------------------

/// A numeric table with row labels (first CSV column) and column names.
struct LabeledMatrix {
    std::string label_header = "row";
    std::vector<std::string> rows;
    std::vector<std::string> columns;
    MatrixXd values;
};

inline LabeledMatrix read_labeled_csv(std::istream& in) {
    LabeledMatrix t;
    std::string line;
    std::size_t line_no = 0;
    auto split = [](const std::string& s) {
        std::vector<std::string> out;
        std::stringstream ss(s);
        std::string f;
        while (std::getline(ss, f, ',')) out.push_back(f);
        if (!s.empty() && s.back() == ',') out.emplace_back();
        return out;
    };
    if (!std::getline(in, line)) throw DataError("table: empty file");
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto header = split(line);
    if (header.size() < 2) throw DataError("table: header needs a label column and at least one value column");
    t.label_header = header.front();
    t.columns.assign(header.begin() + 1, header.end());
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto f = split(line);
        if (f.size() != header.size()) {
            throw DataError("line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) + " fields");
        }
        t.rows.push_back(f.front());
        std::vector<double> vals;
        for (std::size_t j = 1; j < f.size(); ++j) {
            try {
                std::size_t pos = 0;
                vals.push_back(std::stod(f[j], &pos));
                if (pos != f[j].size()) throw std::invalid_argument("trailing");
            } catch (const std::exception&) {
                throw DataError("line " + std::to_string(line_no) + ": missing or non-numeric value in column '" +
                                header[j] + "'");
            }
        }
        rows.push_back(std::move(vals));
    }
    if (rows.empty()) throw DataError("table: no data rows");
    t.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(t.columns.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            t.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    return t;
}

inline void write_labeled_csv(std::ostream& out, const LabeledMatrix& t) {
    out << t.label_header;
    for (const auto& c : t.columns) out << ',' << c;
    out << '\n';
    out.precision(17);
    for (Eigen::Index i = 0; i < t.values.rows(); ++i) {
        out << t.rows.at(static_cast<std::size_t>(i));
        for (Eigen::Index j = 0; j < t.values.cols(); ++j) out << ',' << t.values(i, j);
        out << '\n';
    }
}

/// Reorders `responses` rows to match the row labels of `predictors`.
inline LabeledMatrix align_rows(const LabeledMatrix& predictors, const LabeledMatrix& responses) {
    LabeledMatrix out = responses;
    out.rows = predictors.rows;
    out.values.resize(static_cast<Eigen::Index>(predictors.rows.size()), responses.values.cols());
    for (std::size_t i = 0; i < predictors.rows.size(); ++i) {
        const auto it = std::find(responses.rows.begin(), responses.rows.end(), predictors.rows[i]);
        if (it == responses.rows.end()) throw DataError("responses have no row for '" + predictors.rows[i] + "'");
        out.values.row(static_cast<Eigen::Index>(i)) =
            responses.values.row(static_cast<Eigen::Index>(it - responses.rows.begin()));
    }
    return out;
}

}  // namespace wordorder::pls
