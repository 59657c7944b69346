#include "topomap/quality.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "topomap/error.hpp"

namespace topomap {

namespace {

std::size_t mirror(std::ptrdiff_t i, std::size_t n) {
    const auto len = static_cast<std::ptrdiff_t>(n);
    const std::ptrdiff_t period = 2 * len;
    i %= period;
    if (i < 0) i += period;
    return static_cast<std::size_t>(i < len ? i : period - 1 - i);
}

/// Blurs every row of `in` (rows x cols, row-major) with a symmetric kernel
/// given by its non-negative half `half[0..h]`, writing the transpose so that
/// calling it twice blurs both axes.
void blur_rows_transposed(const double* in, std::size_t rows, std::size_t cols, const std::vector<double>& half,
                          double* out) {
    const std::size_t h = half.size() - 1;
    std::vector<double> padded(cols + 2 * h);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* row = in + r * cols;
        for (std::size_t k = 0; k < padded.size(); ++k)
            padded[k] = row[mirror(static_cast<std::ptrdiff_t>(k) - static_cast<std::ptrdiff_t>(h), cols)];
        for (std::size_t c = 0; c < cols; ++c) {
            const double* p = padded.data() + c + h;
            const double center = *p;
            // Accumulating differences from the center keeps constant rows exact.
            double acc = 0.0;
            for (std::size_t k = 1; k <= h; ++k) acc += half[k] * ((p[-static_cast<std::ptrdiff_t>(k)] - center) + (p[k] - center));
            out[c * rows + r] = center + acc;
        }
    }
}

double catmull_rom(double x) {
    constexpr double a = -0.5;
    x = std::abs(x);
    if (x < 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
    if (x < 2.0) return (((x - 5.0) * x + 8.0) * x - 4.0) * a;
    return 0.0;
}

struct Taps {
    std::size_t first = 0;
    std::size_t reference = 0;
    std::vector<double> weights;  // normalized
};

std::vector<Taps> resample_taps(std::size_t in, std::size_t out) {
    const double scale = static_cast<double>(in) / static_cast<double>(out);
    const double filterscale = std::max(scale, 1.0);
    const double support = 2.0 * filterscale;
    std::vector<Taps> taps(out);
    for (std::size_t i = 0; i < out; ++i) {
        const double center = (static_cast<double>(i) + 0.5) * scale;
        const auto lo = static_cast<std::ptrdiff_t>(std::max(0.0, std::floor(center - support + 0.5)));
        const auto hi = static_cast<std::ptrdiff_t>(std::min(static_cast<double>(in), std::floor(center + support + 0.5)));
        Taps& t = taps[i];
        t.first = static_cast<std::size_t>(lo);
        double total = 0.0;
        for (std::ptrdiff_t j = lo; j < hi; ++j) {
            const double w = catmull_rom((static_cast<double>(j) - center + 0.5) / filterscale);
            t.weights.push_back(w);
            total += w;
        }
        for (double& w : t.weights) w /= total;
        t.reference = std::min(in - 1, static_cast<std::size_t>(std::max(0.0, std::floor(center))));
    }
    return taps;
}

/// Resamples each row of `in` to `out_cols` entries and writes the transpose.
void resample_rows_transposed(const double* in, std::size_t rows, std::size_t cols, std::size_t out_cols,
                              double* out) {
    const auto taps = resample_taps(cols, out_cols);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* row = in + r * cols;
        for (std::size_t c = 0; c < out_cols; ++c) {
            const Taps& t = taps[c];
            const double ref = row[t.reference];
            double acc = 0.0;
            for (std::size_t k = 0; k < t.weights.size(); ++k) acc += t.weights[k] * (row[t.first + k] - ref);
            out[c * rows + r] = ref + acc;
        }
    }
}

QualityReport make_report(Metric metric, std::vector<double> curve) {
    QualityReport r;
    r.metric = metric;
    r.params = metric == Metric::blur ? blur_radii() : resize_sizes();
    r.per_param_mse = std::move(curve);
    r.auc = auc(r.per_param_mse);
    return r;
}

void accumulate(std::vector<double>& sum, const std::vector<double>& add) {
    if (sum.empty()) sum.assign(add.size(), 0.0);
    for (std::size_t i = 0; i < add.size(); ++i) sum[i] += add[i];
}

struct Curves {
    std::vector<double> blur;
    std::vector<double> resize;
};

Curves layout_curves(const NapMatrix& nap, const Layout& layout) {
    if (layout.coords.rows() != static_cast<Eigen::Index>(nap.units()))
        throw Error("layout and NAP matrix have different neuron counts");
    if (nap.group_count() == 0) throw Error("NAP matrix has no groups");
    const FieldInterpolator interp(layout.coords, kMetricResolution, layout.seed);
    const double vmax = nap.vmax();
    Curves sum;
    for (Eigen::Index g = 0; g < nap.color_values.cols(); ++g) {
        const Matrix img = metric_image(interp, nap.color_values.col(g), vmax);
        accumulate(sum.blur, blur_mse_curve(img));
        accumulate(sum.resize, resize_mse_curve(img));
    }
    const double groups = static_cast<double>(nap.group_count());
    for (double& v : sum.blur) v /= groups;
    for (double& v : sum.resize) v /= groups;
    return sum;
}

}  // namespace

std::string to_string(Metric metric) { return metric == Metric::blur ? "blur" : "resize"; }

double QualityReport::trial_mean() const {
    if (trials.empty()) return auc;
    // Deviations from the first trial keep identical trials exact.
    const double ref = trials.front();
    double s = 0.0;
    for (double t : trials) s += t - ref;
    return ref + s / static_cast<double>(trials.size());
}

double QualityReport::trial_min() const {
    return trials.empty() ? auc : *std::min_element(trials.begin(), trials.end());
}

double QualityReport::trial_max() const {
    return trials.empty() ? auc : *std::max_element(trials.begin(), trials.end());
}

double QualityReport::trial_variance() const {
    if (trials.size() < 2) return 0.0;
    const double ref = trials.front();
    const double n = static_cast<double>(trials.size());
    double s = 0.0, sq = 0.0;
    for (double t : trials) {
        s += t - ref;
        sq += (t - ref) * (t - ref);
    }
    return std::max(0.0, (sq - s * s / n) / (n - 1.0));
}

std::vector<double> blur_radii() {
    std::vector<double> r;
    for (int v = 2; v <= 20; v += 2) r.push_back(v);
    return r;
}

std::vector<double> resize_sizes() {
    std::vector<double> s;
    for (int v = 55; v >= 10; v -= 5) s.push_back(v);
    return s;
}

Matrix metric_image(const FieldInterpolator& interp, const Vector& values, double vmax) {
    const int r = interp.resolution();
    if (!(vmax > 0)) return Matrix::Constant(r, r, 0.5);
    Matrix field = interp.interpolate(values, 0.0);
    return ((field.array() + vmax) / (2.0 * vmax)).matrix();
}

Matrix metric_image(const NapMatrix& nap, const Layout& layout, std::size_t group, int resolution) {
    if (group >= nap.group_count()) throw Error("group index out of range");
    const FieldInterpolator interp(layout.coords, resolution, layout.seed);
    return metric_image(interp, nap.color_values.col(static_cast<Eigen::Index>(group)), nap.vmax());
}

Matrix gaussian_blur(const Matrix& image, double sigma) {
    if (!(sigma > 0)) throw Error("gaussian_blur: sigma must be positive");
    const auto h = static_cast<std::size_t>(std::ceil(3.0 * sigma));
    std::vector<double> half(h + 1);
    double total = 0.0;
    for (std::size_t k = 0; k <= h; ++k) {
        half[k] = std::exp(-static_cast<double>(k * k) / (2.0 * sigma * sigma));
        total += k == 0 ? half[k] : 2.0 * half[k];
    }
    for (double& w : half) w /= total;

    const auto rows = static_cast<std::size_t>(image.rows());
    const auto cols = static_cast<std::size_t>(image.cols());
    Matrix tmp(image.cols(), image.rows());
    Matrix out(image.rows(), image.cols());
    blur_rows_transposed(image.data(), rows, cols, half, tmp.data());
    blur_rows_transposed(tmp.data(), cols, rows, half, out.data());
    return out;
}

Matrix resize_bicubic(const Matrix& image, int rows, int cols) {
    if (rows < 1 || cols < 1) throw Error("resize_bicubic: target size must be positive");
    const auto in_rows = static_cast<std::size_t>(image.rows());
    const auto in_cols = static_cast<std::size_t>(image.cols());
    Matrix tmp(cols, image.rows());
    Matrix out(rows, cols);
    resample_rows_transposed(image.data(), in_rows, in_cols, static_cast<std::size_t>(cols), tmp.data());
    resample_rows_transposed(tmp.data(), static_cast<std::size_t>(cols), in_rows, static_cast<std::size_t>(rows),
                             out.data());
    return out;
}

double mse(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw Error("mse: image sizes differ");
    return (a - b).squaredNorm() / static_cast<double>(a.size());
}

std::vector<double> blur_mse_curve(const Matrix& image) {
    std::vector<double> curve;
    for (double r : blur_radii()) curve.push_back(mse(gaussian_blur(image, r / 2.0), image));
    return curve;
}

std::vector<double> resize_mse_curve(const Matrix& image) {
    std::vector<double> curve;
    const auto rows = static_cast<int>(image.rows());
    const auto cols = static_cast<int>(image.cols());
    for (double s : resize_sizes()) {
        const int size = static_cast<int>(s);
        Matrix round_trip = resize_bicubic(resize_bicubic(image, size, size), rows, cols);
        round_trip = round_trip.cwiseMax(0.0).cwiseMin(1.0);
        curve.push_back(mse(round_trip, image));
    }
    return curve;
}

double auc(std::span<const double> curve) {
    if (curve.size() < 2) throw Error("auc needs at least 2 curve points");
    double area = 0.0;
    for (std::size_t k = 0; k + 1 < curve.size(); ++k) area += (curve[k] + curve[k + 1]) / 2.0;
    return area;
}

std::pair<QualityReport, QualityReport> evaluate_layout(const NapMatrix& nap, const Layout& layout) {
    Curves c = layout_curves(nap, layout);
    auto blur = make_report(Metric::blur, std::move(c.blur));
    auto resize = make_report(Metric::resize, std::move(c.resize));
    blur.method = resize.method = to_string(layout.method);
    blur.seeds = resize.seeds = {layout.seed};
    return {blur, resize};
}

std::pair<QualityReport, QualityReport> robustness_trials(const NapSource& source, Method method,
                                                          const MethodParams& params, int n_trials, bool resample,
                                                          std::uint64_t seed, int jobs) {
    if (n_trials < 2) throw Error("robustness trials need n_trials >= 2");
    if (resample && source.activations == nullptr) throw Error("resampled trials need the activation set");
    if (!resample && source.fixed == nullptr && source.activations == nullptr)
        throw Error("robustness trials need a NAP matrix or an activation set");

    std::optional<NapMatrix> shared;
    if (!resample && source.fixed == nullptr)
        shared = build_nap(*source.activations, source.spec, source.activations->seed);
    const NapMatrix* fixed = source.fixed ? source.fixed : shared ? &*shared : nullptr;

    std::vector<Curves> results(static_cast<std::size_t>(n_trials));
    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (;;) {
            const int k = next.fetch_add(1);
            if (k >= n_trials) return;
            try {
                const std::uint64_t trial_seed = seed + static_cast<std::uint64_t>(k);
                if (resample) {
                    const NapMatrix nap = build_nap(*source.activations, source.spec, trial_seed);
                    results[static_cast<std::size_t>(k)] = layout_curves(nap, make_layout(method, nap, params, trial_seed));
                } else {
                    results[static_cast<std::size_t>(k)] =
                        layout_curves(*fixed, make_layout(method, *fixed, params, trial_seed));
                }
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next.store(n_trials);
                return;
            }
        }
    };
    const int workers = std::clamp(jobs, 1, n_trials);
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    }
    if (failure) std::rethrow_exception(failure);

    Curves mean;
    QualityReport blur, resize;
    for (std::size_t k = 0; k < results.size(); ++k) {
        accumulate(mean.blur, results[k].blur);
        accumulate(mean.resize, results[k].resize);
        blur.trials.push_back(auc(results[k].blur));
        resize.trials.push_back(auc(results[k].resize));
        blur.seeds.push_back(seed + k);
    }
    for (double& v : mean.blur) v /= n_trials;
    for (double& v : mean.resize) v /= n_trials;
    auto finish = [&](QualityReport& r, Metric m, std::vector<double> curve) {
        QualityReport base = make_report(m, std::move(curve));
        base.trials = std::move(r.trials);
        base.seeds = blur.seeds;
        base.method = to_string(method);
        r = std::move(base);
    };
    std::vector<std::uint64_t> seeds = blur.seeds;
    finish(blur, Metric::blur, mean.blur);
    blur.seeds = seeds;
    finish(resize, Metric::resize, mean.resize);
    resize.seeds = seeds;
    return {blur, resize};
}

}  // namespace topomap
