#include "shad/shiftbench.hpp"

#include <cmath>
#include <stdexcept>

#include "shad/rng.hpp"

namespace shad {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr int kMaxSeverity = 5;
} // namespace

TargetDirection direction_from_name(const std::string& name) {
    if (name == "forward") return TargetDirection::forward;
    if (name == "uniform") return TargetDirection::uniform;
    if (name == "backward") return TargetDirection::backward;
    throw std::invalid_argument("unknown target direction '" + name + "'");
}

const char* direction_name(TargetDirection d) {
    switch (d) {
    case TargetDirection::forward: return "forward";
    case TargetDirection::uniform: return "uniform";
    case TargetDirection::backward: return "backward";
    }
    return "?";
}

void ShiftScenario::validate() const {
    if (num_classes < 2) throw std::invalid_argument("scenario: num_classes must be >= 2");
    if (input_dim < num_classes)
        throw std::invalid_argument("scenario: input_dim must be >= num_classes for orthonormal means");
    if (rho_source < 1.0 || rho_target < 1.0)
        throw std::invalid_argument("scenario: imbalance ratios must be >= 1");
    if (severity < 0 || severity > kMaxSeverity)
        throw std::invalid_argument("scenario: severity must be in {0..5}");
    if (within_sigma <= 0.0) throw std::invalid_argument("scenario: within_sigma must be > 0");
    if (stream_length < 0) throw std::invalid_argument("scenario: negative stream_length");
    if (batch_size < 2) throw std::invalid_argument("scenario: batch_size must be >= 2");
    if (train_per_class_max < 1) throw std::invalid_argument("scenario: train_per_class_max must be >= 1");
}

std::vector<long long> imbalance_profile(int num_classes, double rho, int n_max) {
    std::vector<long long> counts(static_cast<size_t>(num_classes));
    for (int i = 0; i < num_classes; ++i) {
        const double frac = static_cast<double>(i) / (num_classes - 1);
        const long long n = std::llround(n_max * std::pow(rho, -frac));
        if (n < 1)
            throw std::invalid_argument("imbalance profile: class " + std::to_string(i) +
                                        " count rounds below 1 (rho=" + std::to_string(rho) + ")");
        counts[static_cast<size_t>(i)] = n;
    }
    return counts;
}

namespace {

// Rows of an orthonormal basis via Gram-Schmidt on Gaussian draws.
Matrix orthonormal_basis(int dim, Rng& rng) {
    Matrix q(dim, dim);
    for (int i = 0; i < dim; ++i) {
        std::vector<double> v(static_cast<size_t>(dim));
        while (true) {
            for (int j = 0; j < dim; ++j) v[static_cast<size_t>(j)] = rng.normal();
            for (int k = 0; k < i; ++k) {
                double dot = 0.0;
                for (int j = 0; j < dim; ++j) dot += v[static_cast<size_t>(j)] * q(k, j);
                for (int j = 0; j < dim; ++j) v[static_cast<size_t>(j)] -= dot * q(k, j);
            }
            double norm = 0.0;
            for (double x : v) norm += x * x;
            norm = std::sqrt(norm);
            if (norm > 1e-8) {
                for (int j = 0; j < dim; ++j) q(i, j) = v[static_cast<size_t>(j)] / norm;
                break;
            }
        }
    }
    return q;
}

Matrix class_means(const ShiftScenario& s) {
    Rng rng(derive_seed(s.seed, "means"));
    Matrix basis = orthonormal_basis(s.input_dim, rng);
    Matrix means(s.num_classes, s.input_dim);
    for (int c = 0; c < s.num_classes; ++c)
        for (int j = 0; j < s.input_dim; ++j) means(c, j) = s.mean_scale * basis(c, j);
    return means;
}

} // namespace

ScenarioTruth::ScenarioTruth(const ShiftScenario& s)
    : c_(s.num_classes), dim_(s.input_dim), clean_means_(class_means(s)) {
    const double level = static_cast<double>(s.severity) / kMaxSeverity;
    Rng rng(derive_seed(s.seed, "covshift"));
    basis_ = orthonormal_basis(dim_, rng);
    jitter_.resize(static_cast<size_t>(dim_));
    for (int j = 0; j < dim_; ++j)
        jitter_[static_cast<size_t>(j)] = 1.0 + s.cov.max_scale_jitter * level * rng.uniform(-1.0, 1.0);
    // Offset along a fixed random direction inside the span of the class
    // means, scaled by severity; class-relevant displacement is what source
    // statistics mis-normalize and batch statistics recover.
    offset_.assign(static_cast<size_t>(dim_), 0.0);
    {
        for (int c = 0; c < c_; ++c) {
            const double coef = rng.normal();
            for (int j = 0; j < dim_; ++j)
                offset_[static_cast<size_t>(j)] += coef * clean_means_(c, j);
        }
        double norm = 0.0;
        for (int j = 0; j < dim_; ++j)
            norm += offset_[static_cast<size_t>(j)] * offset_[static_cast<size_t>(j)];
        norm = std::sqrt(norm);
        const double magnitude = s.cov.max_offset_sigma * level * s.within_sigma;
        for (int j = 0; j < dim_; ++j) offset_[static_cast<size_t>(j)] *= magnitude / norm;
    }
    angle_rad_ = s.cov.max_rotation_deg * level * kPi / 180.0;
    noise_sigma_ = s.cov.max_noise_factor * level * s.within_sigma;

    shifted_means_ = Matrix(c_, dim_);
    for (int c = 0; c < c_; ++c) {
        std::vector<double> m(static_cast<size_t>(dim_));
        for (int j = 0; j < dim_; ++j) m[static_cast<size_t>(j)] = clean_means_(c, j);
        transform_inplace(m);
        for (int j = 0; j < dim_; ++j) shifted_means_(c, j) = m[static_cast<size_t>(j)];
    }
    // Rotation is orthogonal and the within-class covariance isotropic, so
    // the per-dimension variance is sigma^2 * jitter_j^2 + noise_sigma^2.
    noise_var_ = Matrix(1, dim_);
    for (int j = 0; j < dim_; ++j) {
        const double f = jitter_[static_cast<size_t>(j)];
        noise_var_.at_flat(j) = s.within_sigma * s.within_sigma * f * f + noise_sigma_ * noise_sigma_;
    }
}

void ScenarioTruth::transform_inplace(std::vector<double>& x) const {
    // Rotate in the basis: disjoint coordinate pairs turn by angle_rad_.
    if (angle_rad_ != 0.0) {
        std::vector<double> y(static_cast<size_t>(dim_), 0.0);
        for (int i = 0; i < dim_; ++i) {
            double dot = 0.0;
            for (int j = 0; j < dim_; ++j) dot += basis_(i, j) * x[static_cast<size_t>(j)];
            y[static_cast<size_t>(i)] = dot;
        }
        const double cs = std::cos(angle_rad_), sn = std::sin(angle_rad_);
        for (int i = 0; i + 1 < dim_; i += 2) {
            const double a = y[static_cast<size_t>(i)], b = y[static_cast<size_t>(i + 1)];
            y[static_cast<size_t>(i)] = cs * a - sn * b;
            y[static_cast<size_t>(i + 1)] = sn * a + cs * b;
        }
        for (int j = 0; j < dim_; ++j) {
            double acc = 0.0;
            for (int i = 0; i < dim_; ++i) acc += basis_(i, j) * y[static_cast<size_t>(i)];
            x[static_cast<size_t>(j)] = acc;
        }
    }
    for (int j = 0; j < dim_; ++j)
        x[static_cast<size_t>(j)] =
            x[static_cast<size_t>(j)] * jitter_[static_cast<size_t>(j)] + offset_[static_cast<size_t>(j)];
}

Matrix ScenarioTruth::posterior(const Matrix& x, const LabelDistribution& prior) const {
    if (x.cols() != dim_) throw_shape_error("posterior: x " + x.shape_str());
    const Matrix log_prior = prior.log_floored();
    Matrix logits(x.rows(), c_);
    for (int i = 0; i < x.rows(); ++i) {
        for (int c = 0; c < c_; ++c) {
            double q = 0.0;
            for (int j = 0; j < dim_; ++j) {
                const double r = x(i, j) - shifted_means_(c, j);
                q += r * r / noise_var_.at_flat(j);
            }
            logits(i, c) = log_prior.at_flat(c) - 0.5 * q;
        }
    }
    // Softmax in place.
    Matrix post(x.rows(), c_);
    for (int i = 0; i < x.rows(); ++i) {
        double mx = logits(i, 0);
        for (int c = 1; c < c_; ++c) mx = std::max(mx, logits(i, c));
        double z = 0.0;
        for (int c = 0; c < c_; ++c) {
            post(i, c) = std::exp(logits(i, c) - mx);
            z += post(i, c);
        }
        for (int c = 0; c < c_; ++c) post(i, c) /= z;
    }
    return post;
}

double ScenarioTruth::bayes_accuracy(const Matrix& x, const std::vector<int>& y,
                                     const LabelDistribution& prior) const {
    const Matrix post = posterior(x, prior);
    int correct = 0;
    for (int i = 0; i < x.rows(); ++i) {
        int best = 0;
        for (int c = 1; c < c_; ++c)
            if (post(i, c) > post(i, best)) best = c;
        if (best == y[static_cast<size_t>(i)]) ++correct;
    }
    return x.rows() > 0 ? static_cast<double>(correct) / x.rows() : 0.0;
}

SourceData make_source(const ShiftScenario& s) {
    s.validate();
    const Matrix means = class_means(s);
    const auto counts = imbalance_profile(s.num_classes, s.rho_source, s.train_per_class_max);

    long long total = 0;
    for (long long c : counts) total += c;

    SourceData data;
    data.counts = counts;
    data.pi_s = LabelDistribution::from_counts(counts);
    data.x = Matrix(static_cast<int>(total), s.input_dim);
    data.y.resize(static_cast<size_t>(total));

    Rng rng(derive_seed(s.seed, "source_data"));
    int row = 0;
    for (int c = 0; c < s.num_classes; ++c) {
        for (long long k = 0; k < counts[static_cast<size_t>(c)]; ++k) {
            for (int j = 0; j < s.input_dim; ++j)
                data.x(row, j) = means(c, j) + s.within_sigma * rng.normal();
            data.y[static_cast<size_t>(row)] = c;
            ++row;
        }
    }
    return data;
}

LabelDistribution target_prior(const ShiftScenario& s) {
    const double rho = s.direction == TargetDirection::uniform ? 1.0 : s.rho_target;
    auto counts = imbalance_profile(s.num_classes, rho, s.train_per_class_max);
    if (s.direction == TargetDirection::backward) {
        std::vector<long long> rev(counts.rbegin(), counts.rend());
        counts.swap(rev);
    }
    return LabelDistribution::from_counts(counts);
}

TargetStream make_target_stream(const ShiftScenario& s) {
    s.validate();
    const Matrix means = class_means(s);
    const ScenarioTruth truth(s);

    TargetStream stream;
    stream.true_prior = target_prior(s);
    stream.batch_size = s.batch_size;
    stream.x = Matrix(s.stream_length, s.input_dim);
    stream.y.resize(static_cast<size_t>(s.stream_length));

    Rng rng(derive_seed(s.seed, "target_stream"));
    std::vector<double> sample(static_cast<size_t>(s.input_dim));
    for (int i = 0; i < s.stream_length; ++i) {
        const int c = rng.categorical(stream.true_prior.probs());
        stream.y[static_cast<size_t>(i)] = c;
        for (int j = 0; j < s.input_dim; ++j)
            sample[static_cast<size_t>(j)] = means(c, j) + s.within_sigma * rng.normal();
        truth.transform_inplace(sample);
        for (int j = 0; j < s.input_dim; ++j)
            stream.x(i, j) = sample[static_cast<size_t>(j)] + truth.noise_sigma() * rng.normal();
    }
    return stream;
}

SourceData make_balanced_probe(const ShiftScenario& s, int per_class) {
    const Matrix means = class_means(s);
    SourceData probe;
    probe.counts.assign(static_cast<size_t>(s.num_classes), per_class);
    probe.pi_s = LabelDistribution::uniform(s.num_classes);
    probe.x = Matrix(s.num_classes * per_class, s.input_dim);
    probe.y.resize(static_cast<size_t>(s.num_classes * per_class));
    Rng rng(derive_seed(s.seed, "balanced_probe"));
    int row = 0;
    for (int c = 0; c < s.num_classes; ++c)
        for (int k = 0; k < per_class; ++k) {
            for (int j = 0; j < s.input_dim; ++j)
                probe.x(row, j) = means(c, j) + s.within_sigma * rng.normal();
            probe.y[static_cast<size_t>(row)] = c;
            ++row;
        }
    return probe;
}

} // namespace shad
