#include "stdn/poisson.hpp"

#include "stdn/common.hpp"

#include <cmath>
#include <cstring>

namespace stdn {

PoissonSystem::PoissonSystem(const RegionMask& mask, double alpha, SolverOptions options)
    : mask_(mask), alpha_(alpha), options_(options) {
    if (alpha < 0.0) throw numeric_error("smoothing scale alpha must be non-negative");
    int h = mask.height(), w = mask.width();
    index_.assign(static_cast<std::size_t>(h) * w, -1);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (mask.inside(y, x)) {
                index_[static_cast<std::size_t>(y) * w + x] =
                    static_cast<std::int32_t>(pixels_.size());
                pixels_.push_back(static_cast<std::int32_t>(y * w + x));
            }
    int n = unknowns();
    offsets_.assign(static_cast<std::size_t>(n) + 1, 0);
    diag_.assign(static_cast<std::size_t>(n), 1.0);
    nbr_.reserve(static_cast<std::size_t>(n) * 4);
    const int dy[4] = {-1, 1, 0, 0};
    const int dx[4] = {0, 0, -1, 1};
    for (int k = 0; k < n; ++k) {
        auto [y, x] = pixel_of(k);
        for (int d = 0; d < 4; ++d) {
            int ny = y + dy[d], nx = x + dx[d];
            if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
            int j = index_of(ny, nx);
            if (j < 0) continue;
            nbr_.push_back(j);
            diag_[static_cast<std::size_t>(k)] += alpha_;
        }
        offsets_[static_cast<std::size_t>(k) + 1] = static_cast<std::int32_t>(nbr_.size());
    }
}

int PoissonSystem::degree(int k) const {
    return offsets_[static_cast<std::size_t>(k) + 1] - offsets_[static_cast<std::size_t>(k)];
}

const std::int32_t* PoissonSystem::neighbours(int k, int& count) const {
    count = degree(k);
    return nbr_.data() + offsets_[static_cast<std::size_t>(k)];
}

void PoissonSystem::apply(const double* x, double* y) const {
    int n = unknowns();
    for (int k = 0; k < n; ++k) {
        double acc = diag_[static_cast<std::size_t>(k)] * x[k];
        for (std::int32_t j = offsets_[static_cast<std::size_t>(k)];
             j < offsets_[static_cast<std::size_t>(k) + 1]; ++j)
            acc -= alpha_ * x[nbr_[static_cast<std::size_t>(j)]];
        y[k] = acc;
    }
}

void PoissonSystem::scatter(const double* x, double* plane) const {
    std::memset(plane, 0, static_cast<std::size_t>(mask_.height()) * mask_.width() *
                              sizeof(double));
    for (std::size_t k = 0; k < pixels_.size(); ++k) plane[pixels_[k]] = x[k];
}

void PoissonSystem::gather(const double* plane, double* x) const {
    for (std::size_t k = 0; k < pixels_.size(); ++k) x[k] = plane[pixels_[k]];
}

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

} // namespace

std::vector<double> solve_gathered(const PoissonSystem& sys, const std::vector<double>& rhs) {
    int n = sys.unknowns();
    std::vector<double> x(static_cast<std::size_t>(n), 0.0);
    if (n == 0) return x;
    double nb = std::sqrt(dot(rhs, rhs));
    if (nb == 0.0) return x;

    int max_it = sys.options().max_iterations > 0 ? sys.options().max_iterations : 10 * n;
    double target = sys.options().tolerance * nb;

    std::vector<double> r = rhs;
    std::vector<double> z(static_cast<std::size_t>(n)), p(static_cast<std::size_t>(n)),
        q(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) z[static_cast<std::size_t>(k)] = r[static_cast<std::size_t>(k)] /
                                                                 sys.diag_[static_cast<std::size_t>(k)];
    p = z;
    double rz = dot(r, z);
    double rn = nb;
    for (int it = 0; it <= max_it; ++it) {
        if (rn <= target) return x;
        if (it == max_it) break;
        sys.apply(p.data(), q.data());
        double pq = dot(p, q);
        if (!(pq > 0.0))
            throw solver_error("conjugate gradient breakdown (non-SPD apply)", rn / nb, it);
        double step = rz / pq;
        for (int k = 0; k < n; ++k) {
            x[static_cast<std::size_t>(k)] += step * p[static_cast<std::size_t>(k)];
            r[static_cast<std::size_t>(k)] -= step * q[static_cast<std::size_t>(k)];
        }
        for (int k = 0; k < n; ++k)
            z[static_cast<std::size_t>(k)] =
                r[static_cast<std::size_t>(k)] / sys.diag_[static_cast<std::size_t>(k)];
        double rz_next = dot(r, z);
        double beta = rz_next / rz;
        rz = rz_next;
        for (int k = 0; k < n; ++k)
            p[static_cast<std::size_t>(k)] =
                z[static_cast<std::size_t>(k)] + beta * p[static_cast<std::size_t>(k)];
        rn = std::sqrt(dot(r, r));
    }
    throw solver_error("conjugate gradient failed to converge", rn / nb, max_it);
}

ChannelField solve(const PoissonSystem& sys, const ChannelField& rhs) {
    if (rhs.height() != sys.mask().height() || rhs.width() != sys.mask().width())
        throw numeric_error("rhs shape does not match the system mask");
    int n = sys.unknowns();
    ChannelField out(rhs.height(), rhs.width(), rhs.channels());
    parallel_for(rhs.channels(), [&](int c) {
        std::vector<double> b(static_cast<std::size_t>(n));
        sys.gather(rhs.plane(c), b.data());
        std::vector<double> u = solve_gathered(sys, b);
        sys.scatter(u.data(), out.plane(c));
    });
    return out;
}

ChannelField solve_adjoint(const PoissonSystem& sys, const ChannelField& out_cotangent) {
    return solve(sys, out_cotangent);
}

ChannelField solve_jvp(const PoissonSystem& sys, const ChannelField& rhs_perturbation) {
    return solve(sys, rhs_perturbation);
}

ChannelField oriented_gradient(const ChannelField& u, const RegionMask& mask, double theta) {
    if (u.height() != mask.height() || u.width() != mask.width())
        throw numeric_error("field shape does not match the mask");
    int h = u.height(), w = u.width();
    double ct = std::cos(theta), st = std::sin(theta);
    ChannelField out(h, w, u.channels());
    for (int c = 0; c < u.channels(); ++c) {
        const double* src = u.plane(c);
        double* dst = out.plane(c);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                if (!mask.inside(y, x)) continue;
                std::size_t i = static_cast<std::size_t>(y) * w + x;
                bool xm = x > 0 && mask.inside(y, x - 1);
                bool xp = x < w - 1 && mask.inside(y, x + 1);
                bool ym = y > 0 && mask.inside(y - 1, x);
                bool yp = y < h - 1 && mask.inside(y + 1, x);
                double gx = 0.0, gy = 0.0;
                if (xm && xp)
                    gx = 0.5 * (src[i + 1] - src[i - 1]);
                else if (xp)
                    gx = src[i + 1] - src[i];
                else if (xm)
                    gx = src[i] - src[i - 1];
                if (ym && yp)
                    gy = 0.5 * (src[i + w] - src[i - w]);
                else if (yp)
                    gy = src[i + w] - src[i];
                else if (ym)
                    gy = src[i] - src[i - w];
                dst[i] = ct * gx + st * gy;
            }
    }
    return out;
}

} // namespace stdn
