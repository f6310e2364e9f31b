#pragma once

// Synthetic joint covariate + label shift scenarios with exact, known
// priors and posteriors. Class-conditional Gaussians on scaled orthonormal
// means; the long-tailed profile is n_i = round(n_max * rho^(-i/(C-1))).
// Covariate shift at severity s in {0..5}: rotation in disjoint random
// planes (angle grows to max_rotation_deg), per-dimension scale jitter
// (up to +-max_scale_jitter), a global mean offset along a fixed random
// direction (up to max_offset_sigma * within_sigma; the brightness/fog
// analog that batch statistics can undo) and additive Gaussian noise
// (stddev up to max_noise_factor * within_sigma). Everything regenerates
// from the seed; nothing is stored.

#include <cstdint>
#include <string>
#include <vector>

#include "shad/label_distribution.hpp"
#include "shad/matrix.hpp"

namespace shad {

enum class TargetDirection { forward, uniform, backward };

TargetDirection direction_from_name(const std::string& name);
const char* direction_name(TargetDirection d);

struct CovariateShiftSpec {
    double max_rotation_deg = 25.0;
    double max_noise_factor = 0.5;
    double max_scale_jitter = 0.30;
    double max_offset_sigma = 7.0;
};

struct ShiftScenario {
    int num_classes = 10;
    int input_dim = 16;
    double mean_scale = 5.0;     // class-mean radius (well-separated classes at severity 0)
    double within_sigma = 1.0;
    int train_per_class_max = 1000;  // n_max of the exponential profile
    double rho_source = 100.0;
    int severity = 3;                // 0 = no covariate shift
    TargetDirection direction = TargetDirection::uniform;
    double rho_target = 10.0;
    int stream_length = 12800;
    int batch_size = 64;
    uint64_t seed = 0;
    CovariateShiftSpec cov;

    void validate() const;
};

struct SourceData {
    Matrix x;
    std::vector<int> y;
    std::vector<long long> counts;
    LabelDistribution pi_s;
};

struct TargetStream {
    Matrix x;                    // covariate-shifted features
    std::vector<int> y;          // hidden labels, used only for scoring
    LabelDistribution true_prior;
    int batch_size = 64;
};

// The generator's ground truth for one scenario: severity-0 class means and
// the covariate transform, from which shifted means, noise variances and
// exact posteriors follow in closed form.
class ScenarioTruth {
public:
    explicit ScenarioTruth(const ShiftScenario& s);

    // Mean of class c after the severity transform of the scenario.
    const Matrix& shifted_means() const { return shifted_means_; }
    // Per-dimension total variance of x given the class (diagonal).
    const Matrix& noise_var() const { return noise_var_; }

    // Applies rotation + scale jitter to a clean sample (no noise).
    void transform_inplace(std::vector<double>& x) const;
    double noise_sigma() const { return noise_sigma_; }

    // Exact p(y | x) rows under the given prior, n x C.
    Matrix posterior(const Matrix& x, const LabelDistribution& prior) const;
    // Accuracy of the exact-posterior classifier on labeled data.
    double bayes_accuracy(const Matrix& x, const std::vector<int>& y,
                          const LabelDistribution& prior) const;

private:
    int c_;
    int dim_;
    Matrix clean_means_;    // C x D
    Matrix shifted_means_;  // C x D
    Matrix noise_var_;      // 1 x D
    Matrix basis_;          // D x D rotation-plane basis
    std::vector<double> jitter_;
    std::vector<double> offset_;
    double angle_rad_ = 0.0;
    double noise_sigma_ = 0.0;
};

// Exponential-profile class counts; throws (naming the class) if a count
// would round below 1.
std::vector<long long> imbalance_profile(int num_classes, double rho, int n_max);

SourceData make_source(const ShiftScenario& s);

// The exact target prior the stream is drawn from: the source profile
// ordered per direction with ratio rho_target.
LabelDistribution target_prior(const ShiftScenario& s);

TargetStream make_target_stream(const ShiftScenario& s);

// A class-balanced labeled probe at severity 0 (source domain), for
// validation metrics.
SourceData make_balanced_probe(const ShiftScenario& s, int per_class);

} // namespace shad
