#include "rpflow/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

namespace rpflow::metrics {

double psnr(const Matrix& pred, const Matrix& truth, double peak) {
    if (pred.rows() != truth.rows() || pred.cols() != truth.cols())
        throw DimensionMismatch("psnr: shape mismatch");
    if (!(peak > 0.0)) throw InvalidParam("psnr: peak must be > 0");
    double mse = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred.data()[i] - truth.data()[i];
        mse += d * d;
    }
    mse /= static_cast<double>(pred.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(peak * peak / mse);
}

namespace {

constexpr std::size_t kSsimWindow = 11;

std::vector<double> gaussian_window(std::size_t size, double sigma) {
    std::vector<double> w(size);
    const double c = (static_cast<double>(size) - 1.0) / 2.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < size; ++i) {
        const double d = static_cast<double>(i) - c;
        w[i] = std::exp(-d * d / (2.0 * sigma * sigma));
        sum += w[i];
    }
    for (double& v : w) v /= sum;
    return w;
}

}  // namespace

double ssim(const Matrix& pred, const Matrix& truth, double peak) {
    if (pred.rows() != truth.rows() || pred.cols() != truth.cols())
        throw DimensionMismatch("ssim: shape mismatch");
    if (pred.rows() < kSsimWindow || pred.cols() < kSsimWindow)
        throw ImageTooSmall("ssim: image smaller than the 11x11 window");

    const std::vector<double> w1d = gaussian_window(kSsimWindow, 1.5);
    const double c1 = (0.01 * peak) * (0.01 * peak);
    const double c2 = (0.03 * peak) * (0.03 * peak);

    const std::size_t h = pred.rows(), w = pred.cols();
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i + kSsimWindow <= h; ++i)
        for (std::size_t j = 0; j + kSsimWindow <= w; ++j) {
            double mx = 0.0, my = 0.0, sxx = 0.0, syy = 0.0, sxy = 0.0;
            for (std::size_t a = 0; a < kSsimWindow; ++a)
                for (std::size_t b = 0; b < kSsimWindow; ++b) {
                    const double wt = w1d[a] * w1d[b];
                    const double x = pred(i + a, j + b);
                    const double y = truth(i + a, j + b);
                    mx += wt * x;
                    my += wt * y;
                    sxx += wt * (x * x);
                    syy += wt * (y * y);
                    sxy += wt * (x * y);  // grouped so ssim(a,b) == ssim(b,a) bitwise
                }
            sxx -= mx * mx;
            syy -= my * my;
            sxy -= mx * my;
            const double num = (2.0 * mx * my + c1) * (2.0 * sxy + c2);
            const double den = (mx * mx + my * my + c1) * (sxx + syy + c2);
            total += num / den;
            ++count;
        }
    return total / static_cast<double>(count);
}

double ssim_field(const Matrix& pred, const Matrix& truth, std::size_t height, std::size_t width,
                  double peak) {
    if (pred.rows() != height * width)
        throw DimensionMismatch("ssim_field: rows != height*width");
    if (pred.cols() != truth.cols() || pred.rows() != truth.rows())
        throw DimensionMismatch("ssim_field: shape mismatch");
    double total = 0.0;
    for (std::size_t c = 0; c < pred.cols(); ++c) {
        Matrix a(height, width), b(height, width);
        for (std::size_t i = 0; i < height; ++i)
            for (std::size_t j = 0; j < width; ++j) {
                a(i, j) = pred(i * width + j, c);
                b(i, j) = truth(i * width + j, c);
            }
        total += ssim(a, b, peak);
    }
    return total / static_cast<double>(pred.cols());
}

std::vector<std::size_t> solve_assignment(const Matrix& cost, double* total_cost) {
    if (cost.rows() != cost.cols()) throw SizeMismatch("solve_assignment: cost matrix not square");
    const std::size_t n = cost.rows();
    const double inf = std::numeric_limits<double>::infinity();

    // Shortest augmenting path form of the Hungarian method, 1-based helpers.
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = p[j0];
            std::size_t j1 = 0;
            double delta = inf;
            for (std::size_t j = 1; j <= n; ++j)
                if (!used[j]) {
                    const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if (cur < minv[j]) {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if (minv[j] < delta) {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }

    std::vector<std::size_t> rowsol(n, 0);
    double total = 0.0;
    for (std::size_t j = 1; j <= n; ++j)
        if (p[j] != 0) {
            rowsol[p[j] - 1] = j - 1;
            total += cost(p[j] - 1, j - 1);
        }
    if (total_cost) *total_cost = total;
    return rowsol;
}

namespace {

double pooled1d_w1(const Matrix& a, const Matrix& b) {
    std::vector<double> xs(a.data(), a.data() + a.size());
    std::vector<double> ys(b.data(), b.data() + b.size());
    std::sort(xs.begin(), xs.end());
    std::sort(ys.begin(), ys.end());
    // integral of |Qa - Qb| over the merged quantile breakpoints
    const std::size_t na = xs.size(), nb = ys.size();
    double total = 0.0;
    std::size_t i = 0, j = 0;
    double prev = 0.0;
    while (i < na && j < nb) {
        const double qa = static_cast<double>(i + 1) / static_cast<double>(na);
        const double qb = static_cast<double>(j + 1) / static_cast<double>(nb);
        const double next = std::min(qa, qb);
        total += (next - prev) * std::abs(xs[i] - ys[j]);
        prev = next;
        if (qa <= qb) ++i;
        if (qb <= qa) ++j;
    }
    return total;
}

}  // namespace

double wasserstein1(const Matrix& a, const Matrix& b, W1Mode mode) {
    if (a.rows() == 0 || b.rows() == 0) throw InvalidParam("wasserstein1: empty sample set");
    if (mode == W1Mode::pooled1d) return pooled1d_w1(a, b);

    if (a.rows() != b.rows())
        throw SizeMismatch("wasserstein1: exact mode needs equal set sizes");
    if (a.cols() != b.cols()) throw DimensionMismatch("wasserstein1: point dims differ");
    if (a.rows() > 1024) throw SizeMismatch("wasserstein1: exact mode capped at 1024 points");

    const std::size_t n = a.rows(), m = a.cols();
    Matrix cost(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double sq = 0.0;
            for (std::size_t c = 0; c < m; ++c) {
                const double d = a(i, c) - b(j, c);
                sq += d * d;
            }
            cost(i, j) = std::sqrt(sq);
        }
    double total = 0.0;
    solve_assignment(cost, &total);
    return total / static_cast<double>(n);
}

PceResult pce(const pipeline::Ensemble& ensemble, const Matrix& truth, double p,
              std::size_t levels) {
    const std::size_t s = ensemble.count();
    if (s < 20) throw InsufficientSamples("pce: need at least 20 ensemble members");
    const std::size_t n = ensemble.points();
    const std::size_t m = ensemble.channels();
    if (truth.rows() != n || truth.cols() != m) throw DimensionMismatch("pce: truth shape mismatch");

    PceResult out;
    out.curve.levels.resize(levels);
    out.curve.coverage.assign(levels, 0.0);
    for (std::size_t j = 0; j < levels; ++j)
        out.curve.levels[j] = static_cast<double>(j + 1) / static_cast<double>(levels + 1);

    std::vector<double> buf(s);
    std::vector<std::size_t> inside(levels, 0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < m; ++c) {
            for (std::size_t k = 0; k < s; ++k) buf[k] = ensemble.samples[k](i, c);
            std::sort(buf.begin(), buf.end());
            const double y = truth(i, c);
            for (std::size_t j = 0; j < levels; ++j) {
                const double t = out.curve.levels[j];
                auto q = [&](double level) {
                    const double pos = level * static_cast<double>(s - 1);
                    const auto lo = static_cast<std::size_t>(std::floor(pos));
                    const auto hi = std::min(lo + 1, s - 1);
                    if (buf[lo] == buf[hi]) return buf[lo];
                    const double frac = pos - static_cast<double>(lo);
                    return buf[lo] * (1.0 - frac) + buf[hi] * frac;
                };
                const double lo = q((1.0 - t) / 2.0);
                const double hi = q((1.0 + t) / 2.0);
                if (y >= lo && y <= hi) ++inside[j];
            }
        }

    const double scalars = static_cast<double>(n * m);
    double acc = 0.0;
    for (std::size_t j = 0; j < levels; ++j) {
        out.curve.coverage[j] = static_cast<double>(inside[j]) / scalars;
        acc += std::pow(std::abs(out.curve.coverage[j] - out.curve.levels[j]), p);
    }
    out.value = acc / static_cast<double>(levels);
    return out;
}

namespace {

// mean over rows of |row - center|^k, and the row mean itself
struct CenteredMoment {
    std::vector<double> mean;
    double moment = 0.0;
};

CenteredMoment centered_moment(const Matrix& samples, std::size_t order) {
    const std::size_t s = samples.rows(), m = samples.cols();
    CenteredMoment out;
    out.mean.assign(m, 0.0);
    for (std::size_t i = 0; i < s; ++i)
        for (std::size_t c = 0; c < m; ++c) out.mean[c] += samples(i, c);
    for (double& v : out.mean) v /= static_cast<double>(s);
    for (std::size_t i = 0; i < s; ++i) {
        double sq = 0.0;
        for (std::size_t c = 0; c < m; ++c) {
            const double d = samples(i, c) - out.mean[c];
            sq += d * d;
        }
        out.moment += std::pow(std::sqrt(sq), static_cast<double>(order));
    }
    out.moment /= static_cast<double>(s);
    return out;
}

}  // namespace

MomentBoundReport check_moment_bounds(const Matrix& target_samples, const Matrix& source_samples,
                                      const std::vector<double>& transported_mean,
                                      double lipschitz, std::size_t order) {
    if (target_samples.rows() != source_samples.rows())
        throw DimensionMismatch("check_moment_bounds: sample counts differ");
    if (transported_mean.size() != target_samples.cols())
        throw DimensionMismatch("check_moment_bounds: transported mean dim mismatch");
    if (order < 1) throw InvalidParam("check_moment_bounds: order must be >= 1");

    const CenteredMoment src = centered_moment(source_samples, order);
    const CenteredMoment tgt = centered_moment(target_samples, order);

    MomentBoundReport rep;
    double gap = 0.0;
    for (std::size_t c = 0; c < target_samples.cols(); ++c) {
        const double d = tgt.mean[c] - transported_mean[c];
        gap += d * d;
    }
    rep.lhs_mean_gap = std::sqrt(gap);
    rep.rhs_mean_gap = lipschitz * std::pow(src.moment, 1.0 / static_cast<double>(order));
    rep.mean_gap_ok = rep.lhs_mean_gap <= rep.rhs_mean_gap;

    rep.lhs_moment = tgt.moment;
    rep.rhs_moment = std::pow(2.0 * lipschitz, static_cast<double>(order)) * src.moment;
    rep.moment_ok = rep.lhs_moment <= rep.rhs_moment;
    return rep;
}

std::size_t TailBoundReport::flagged_count() const {
    std::size_t n = 0;
    for (const auto& p : points)
        if (p.flagged) ++n;
    return n;
}

TailBoundReport check_tail_bound(const Matrix& batch_samples, std::size_t batch_size,
                                 double lipschitz, double source_variance,
                                 const std::vector<double>& thresholds) {
    if (batch_size < 1) throw InvalidParam("check_tail_bound: batch size must be >= 1");
    if (batch_samples.rows() % batch_size != 0)
        throw DimensionMismatch("check_tail_bound: rows not divisible by batch size");
    const std::size_t batches = batch_samples.rows() / batch_size;
    const std::size_t m = batch_samples.cols();

    std::vector<double> mu(m, 0.0);
    for (std::size_t i = 0; i < batch_samples.rows(); ++i)
        for (std::size_t c = 0; c < m; ++c) mu[c] += batch_samples(i, c);
    for (double& v : mu) v /= static_cast<double>(batch_samples.rows());

    std::vector<double> deviation(batches, 0.0);
    for (std::size_t b = 0; b < batches; ++b) {
        std::vector<double> bm(m, 0.0);
        for (std::size_t i = 0; i < batch_size; ++i)
            for (std::size_t c = 0; c < m; ++c) bm[c] += batch_samples(b * batch_size + i, c);
        double sq = 0.0;
        for (std::size_t c = 0; c < m; ++c) {
            bm[c] /= static_cast<double>(batch_size);
            const double d = bm[c] - mu[c];
            sq += d * d;
        }
        deviation[b] = std::sqrt(sq);
    }

    TailBoundReport rep;
    for (double t : thresholds) {
        TailBoundPoint pt;
        pt.threshold = t;
        std::size_t exceed = 0;
        for (double d : deviation)
            if (d > t) ++exceed;
        pt.empirical = static_cast<double>(exceed) / static_cast<double>(batches);
        pt.bound = 4.0 * lipschitz * lipschitz * source_variance /
                   (static_cast<double>(batch_size) * t * t);
        pt.vacuous = pt.bound >= 1.0;
        pt.flagged = !pt.vacuous && pt.empirical > pt.bound;
        rep.points.push_back(pt);
    }
    return rep;
}

void write_reliability_csv(const ReliabilityCurve& curve, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path);
    out << "level,coverage\n";
    out.precision(17);
    for (std::size_t i = 0; i < curve.levels.size(); ++i)
        out << curve.levels[i] << "," << curve.coverage[i] << "\n";
}

}  // namespace rpflow::metrics
