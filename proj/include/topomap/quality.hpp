#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "topomap/layout.hpp"
#include "topomap/matrix.hpp"
#include "topomap/nap.hpp"
#include "topomap/pso.hpp"
#include "topomap/render.hpp"

namespace topomap {

enum class Metric { blur, resize };

std::string to_string(Metric metric);

/// MSE-vs-alteration curve of one metric and its trapezoidal area.
/// Lower is better: smooth maps with large uniform regions change little.
struct QualityReport {
    Metric metric = Metric::blur;
    std::vector<double> params;         ///< blur radii (px) or downscale sizes (px)
    std::vector<double> per_param_mse;  ///< mean over groups (and trials)
    double auc = 0.0;
    std::vector<double> trials;         ///< per-trial AUC, empty for a single evaluation
    std::vector<std::uint64_t> seeds;   ///< layout seed of each trial
    std::string method;

    double trial_mean() const;
    double trial_min() const;
    double trial_max() const;
    double trial_variance() const;
};

/// Blur radii 2, 4, ..., 20 px.
std::vector<double> blur_radii();
/// Downscale sizes 55, 50, ..., 10 px.
std::vector<double> resize_sizes();

constexpr int kMetricResolution = 300;

/// Interpolated field of one group mapped to [0, 1] with the figure-wide
/// color limit: v -> (v + vmax) / (2 vmax). Outside the hull the neutral value
/// 0 maps to 0.5. vmax == 0 gives a uniform 0.5 image.
Matrix metric_image(const NapMatrix& nap, const Layout& layout, std::size_t group,
                    int resolution = kMetricResolution);
Matrix metric_image(const FieldInterpolator& interp, const Vector& values, double vmax);

/// Separable Gaussian blur, kernel half-width ceil(3 sigma), borders
/// mirrored (edge pixel repeated).
Matrix gaussian_blur(const Matrix& image, double sigma);

/// Separable bicubic resampling with the Catmull-Rom kernel (a = -0.5). When
/// shrinking, the kernel is stretched by the scale factor so every input
/// pixel contributes; windows are clipped at the border and renormalized.
Matrix resize_bicubic(const Matrix& image, int rows, int cols);

double mse(const Matrix& a, const Matrix& b);

/// MSE between the image and its blur for each radius r (sigma = r / 2).
std::vector<double> blur_mse_curve(const Matrix& image);

/// MSE between the image and its bicubic down-then-up resize for each size,
/// with the round trip clamped to [0, 1].
std::vector<double> resize_mse_curve(const Matrix& image);

/// Trapezoidal rule with unit spacing.
double auc(std::span<const double> curve);

/// Metric images for every group, curves averaged over groups, then AUC.
std::pair<QualityReport, QualityReport> evaluate_layout(const NapMatrix& nap, const Layout& layout);

/// Where robustness trials get their NAP matrix: a fixed matrix, or
/// activations plus grouping that are resampled per trial.
struct NapSource {
    const NapMatrix* fixed = nullptr;
    const ActivationSet* activations = nullptr;
    GroupSpec spec;
};

/// Repeats layout + evaluation n_trials times. Trial k uses seed + k for the
/// layout and, with `resample`, also for subsampling the NAP matrix. Runs
/// up to `jobs` trials concurrently; results are ordered by trial index.
std::pair<QualityReport, QualityReport> robustness_trials(const NapSource& source, Method method,
                                                          const MethodParams& params, int n_trials, bool resample,
                                                          std::uint64_t seed, int jobs = 1);

}  // namespace topomap
