#include "wfsim/weakmeas.hpp"

#include "wfsim/errors.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>

namespace wfsim::weakmeas {

namespace {
constexpr double kQuarterPow = 0.25;
}

double gaussian_overlap(double a, double b, double w) {
    const double d = a - b;
    return std::exp(-d * d / (8.0 * w * w));
}

double gaussian_x_overlap(double a, double b, double w) {
    return 0.5 * (a + b) * gaussian_overlap(a, b, w);
}

double gaussian_amplitude(double x, double a, double w) {
    const double d = x - a;
    return std::pow(2.0 * M_PI * w * w, -kQuarterPow) * std::exp(-d * d / (4.0 * w * w));
}

qmath::cplx weak_value(const qmath::CVector& pre, const qmath::CVector& post,
                       const qmath::CMatrix& O) {
    const qmath::cplx denom = qmath::inner(post, pre);
    if (std::abs(denom) <= 1e-12)
        throw SingularError("weak_value: orthogonal pre/post selection");
    return qmath::inner(post, qmath::apply(O, pre)) / denom;
}

HybridState attach_pointers(const registers::DiscreteState& state, double w) {
    if (!(w > 0.0)) throw ContractError("attach_pointers: width must be positive");
    HybridState h;
    h.layout = state.layout;
    h.width = w;
    for (std::size_t i = 0; i < state.amplitudes.dim(); ++i) {
        const qmath::cplx amp = state.amplitudes[i];
        if (amp == qmath::cplx(0.0)) continue;
        h.terms.push_back({i, {amp, 0.0, 0.0}});
    }
    return h;
}

namespace {

std::size_t digit_of(const registers::RegisterLayout& lay, std::size_t index, std::size_t pos) {
    return (index / lay.stride_at(pos)) % lay.registers[pos].dim;
}

void coalesce_terms(std::vector<HybridTerm>& terms) {
    std::map<std::tuple<std::size_t, double, double>, qmath::cplx> merged;
    for (const HybridTerm& t : terms)
        merged[{t.discreteIndex, t.gauss.shift1, t.gauss.shift2}] += t.gauss.amp;
    terms.clear();
    for (const auto& [key, amp] : merged) {
        if (amp == qmath::cplx(0.0)) continue;
        terms.push_back({std::get<0>(key), {amp, std::get<1>(key), std::get<2>(key)}});
    }
}

} // namespace

HybridState couple(const HybridState& h, const std::string& qubit, int pointerIndex, double g) {
    const std::size_t pos = h.layout.position_of(qubit);
    if (h.layout.registers[pos].dim != 2)
        throw LayoutError("couple: register '" + qubit + "' is not a qubit");
    if (pointerIndex != 1 && pointerIndex != 2)
        throw ContractError("couple: pointerIndex must be 1 or 2");
    HybridState out = h;
    for (HybridTerm& t : out.terms) {
        const double sign = (digit_of(h.layout, t.discreteIndex, pos) == 0) ? +1.0 : -1.0;
        if (pointerIndex == 1)
            t.gauss.shift1 += sign * g;
        else
            t.gauss.shift2 += sign * g;
    }
    return out;
}

double norm2(const HybridState& h) {
    double total = 0.0;
    const double w = h.width;
    for (std::size_t a = 0; a < h.terms.size(); ++a) {
        const HybridTerm& ta = h.terms[a];
        total += std::norm(ta.gauss.amp);
        for (std::size_t b = a + 1; b < h.terms.size(); ++b) {
            const HybridTerm& tb = h.terms[b];
            if (ta.discreteIndex != tb.discreteIndex) continue;
            const double gg = gaussian_overlap(ta.gauss.shift1, tb.gauss.shift1, w) *
                              gaussian_overlap(ta.gauss.shift2, tb.gauss.shift2, w);
            total += 2.0 * (std::conj(ta.gauss.amp) * tb.gauss.amp).real() * gg;
        }
    }
    return total;
}

HybridState project_qubit(const HybridState& h, const std::string& reg,
                          const qmath::CVector& target) {
    const std::size_t pos = h.layout.position_of(reg);
    const std::size_t dim = h.layout.registers[pos].dim;
    if (target.dim() != dim) throw LayoutError("project_qubit: target dim mismatch");
    const std::size_t stride = h.layout.stride_at(pos);

    HybridState out;
    out.layout = h.layout;
    out.layout.registers.erase(out.layout.registers.begin() + static_cast<std::ptrdiff_t>(pos));
    out.width = h.width;
    out.terms.reserve(h.terms.size());
    for (const HybridTerm& t : h.terms) {
        const std::size_t i = t.discreteIndex;
        const std::size_t d = (i / stride) % dim;
        const qmath::cplx amp = t.gauss.amp * std::conj(target[d]);
        if (amp == qmath::cplx(0.0)) continue;
        const std::size_t outer = i / (stride * dim);
        const std::size_t inner = i % stride;
        out.terms.push_back({outer * stride + inner, {amp, t.gauss.shift1, t.gauss.shift2}});
    }
    coalesce_terms(out.terms);
    return out;
}

std::pair<HybridState, double> postselect_qubits(const HybridState& h, const PostSelection& ps) {
    if (!h.layout.has("Q1") || !h.layout.has("Q2"))
        throw LayoutError("postselect_qubits: Q1/Q2 not present");
    const auto ket = [&](double theta) {
        return ps.direction >= 0 ? qmath::ket_plus_theta(theta) : qmath::ket_minus_theta(theta);
    };
    HybridState out = project_qubit(h, "Q1", ket(ps.theta1));
    out = project_qubit(out, "Q2", ket(ps.theta2));
    return {out, norm2(out)};
}

namespace {

double pair_sum(const HybridState& h, double (*f1)(double, double, double),
                double (*f2)(double, double, double)) {
    double total = 0.0;
    const double w = h.width;
    for (std::size_t a = 0; a < h.terms.size(); ++a) {
        const HybridTerm& ta = h.terms[a];
        total += std::norm(ta.gauss.amp) * f1(ta.gauss.shift1, ta.gauss.shift1, w) *
                 f2(ta.gauss.shift2, ta.gauss.shift2, w);
        for (std::size_t b = a + 1; b < h.terms.size(); ++b) {
            const HybridTerm& tb = h.terms[b];
            if (ta.discreteIndex != tb.discreteIndex) continue;
            total += 2.0 * (std::conj(ta.gauss.amp) * tb.gauss.amp).real() *
                     f1(ta.gauss.shift1, tb.gauss.shift1, w) *
                     f2(ta.gauss.shift2, tb.gauss.shift2, w);
        }
    }
    return total;
}

} // namespace

double joint_position_moment(const HybridState& h) {
    return pair_sum(h, gaussian_x_overlap, gaussian_x_overlap);
}

double position_moment(const HybridState& h, int pointerIndex) {
    if (pointerIndex == 1) return pair_sum(h, gaussian_x_overlap, gaussian_overlap);
    if (pointerIndex == 2) return pair_sum(h, gaussian_overlap, gaussian_x_overlap);
    throw ContractError("position_moment: pointerIndex must be 1 or 2");
}

double normalized_position_moment(const HybridState& h) {
    const double n2 = norm2(h);
    if (n2 < 1e-14) throw SingularError("normalized_position_moment: vanishing branch norm");
    return joint_position_moment(h) / n2;
}

qmath::CMatrix reduced_dm(const HybridState& h, const std::vector<std::string>& names) {
    if (names.empty()) throw LayoutError("reduced_dm: empty register set");
    std::vector<std::size_t> keepPos;
    keepPos.reserve(names.size());
    for (const std::string& n : names) keepPos.push_back(h.layout.position_of(n));

    const auto split = [&](std::size_t index) {
        std::size_t named = 0;
        std::size_t rest = 0;
        for (std::size_t p = 0; p < h.layout.registers.size(); ++p) {
            const std::size_t d = digit_of(h.layout, index, p);
            const auto it = std::find(keepPos.begin(), keepPos.end(), p);
            if (it != keepPos.end()) continue;
            rest = rest * h.layout.registers[p].dim + d;
        }
        for (std::size_t p : keepPos) named = named * h.layout.registers[p].dim + digit_of(h.layout, index, p);
        return std::pair<std::size_t, std::size_t>{named, rest};
    };

    std::size_t keepDim = 1;
    for (std::size_t p : keepPos) keepDim *= h.layout.registers[p].dim;
    qmath::CMatrix rho(keepDim, keepDim);
    const double w = h.width;
    for (const HybridTerm& ta : h.terms) {
        const auto [na, ra] = split(ta.discreteIndex);
        for (const HybridTerm& tb : h.terms) {
            const auto [nb, rb] = split(tb.discreteIndex);
            if (ra != rb) continue;
            const double gg = gaussian_overlap(tb.gauss.shift1, ta.gauss.shift1, w) *
                              gaussian_overlap(tb.gauss.shift2, ta.gauss.shift2, w);
            rho(na, nb) += ta.gauss.amp * std::conj(tb.gauss.amp) * gg;
        }
    }
    return rho;
}

registers::DiscreteState collapse_at_positions(const HybridState& h, double x1, double x2) {
    registers::DiscreteState st;
    st.layout = h.layout;
    st.amplitudes = qmath::CVector(h.layout.total_dim());
    for (const HybridTerm& t : h.terms)
        st.amplitudes[t.discreteIndex] += t.gauss.amp *
                                          gaussian_amplitude(x1, t.gauss.shift1, h.width) *
                                          gaussian_amplitude(x2, t.gauss.shift2, h.width);
    const double n = qmath::norm(st.amplitudes);
    if (n < 1e-300) throw SingularError("collapse_at_positions: zero-amplitude position");
    st.amplitudes = qmath::scaled(st.amplitudes, 1.0 / n);
    st.normFlag = true;
    return st;
}

PositionSampler::PositionSampler(const HybridState& h, std::size_t gridPoints)
    : width_(h.width), n_(gridPoints) {
    if (gridPoints < 16) throw ContractError("PositionSampler: grid too coarse");
    std::vector<HybridTerm> terms = h.terms;
    coalesce_terms(terms);
    if (terms.empty()) throw SingularError("PositionSampler: empty branch");

    double s1lo = terms[0].gauss.shift1, s1hi = s1lo;
    double s2lo = terms[0].gauss.shift2, s2hi = s2lo;
    for (const HybridTerm& t : terms) {
        s1lo = std::min(s1lo, t.gauss.shift1);
        s1hi = std::max(s1hi, t.gauss.shift1);
        s2lo = std::min(s2lo, t.gauss.shift2);
        s2hi = std::max(s2hi, t.gauss.shift2);
    }
    x1lo_ = s1lo - 8.0 * width_;
    x1hi_ = s1hi + 8.0 * width_;
    x2lo_ = s2lo - 8.0 * width_;
    x2hi_ = s2hi + 8.0 * width_;
    dx1_ = (x1hi_ - x1lo_) / static_cast<double>(n_ - 1);
    dx2_ = (x2hi_ - x2lo_) / static_cast<double>(n_ - 1);

    for (std::size_t a = 0; a < terms.size(); ++a) {
        for (std::size_t b = a; b < terms.size(); ++b) {
            if (terms[a].discreteIndex != terms[b].discreteIndex) continue;
            Pair p;
            p.weight = (a == b)
                           ? std::norm(terms[a].gauss.amp)
                           : 2.0 * (std::conj(terms[a].gauss.amp) * terms[b].gauss.amp).real();
            if (p.weight == 0.0) continue;
            p.a1 = terms[a].gauss.shift1;
            p.b1 = terms[b].gauss.shift1;
            p.a2 = terms[a].gauss.shift2;
            p.b2 = terms[b].gauss.shift2;
            p.cum2.resize(n_);
            double prev = gaussian_amplitude(x2lo_, p.a2, width_) *
                          gaussian_amplitude(x2lo_, p.b2, width_);
            p.cum2[0] = 0.0;
            for (std::size_t k = 1; k < n_; ++k) {
                const double x = x2lo_ + dx2_ * static_cast<double>(k);
                const double cur = gaussian_amplitude(x, p.a2, width_) *
                                   gaussian_amplitude(x, p.b2, width_);
                p.cum2[k] = p.cum2[k - 1] + 0.5 * (prev + cur) * dx2_;
                prev = cur;
            }
            pairs_.push_back(std::move(p));
        }
    }

    cum1_.resize(n_);
    cum1_[0] = 0.0;
    double prev = 0.0;
    for (std::size_t k = 0; k < n_; ++k) {
        const double x = x1lo_ + dx1_ * static_cast<double>(k);
        double m = 0.0;
        for (const Pair& p : pairs_)
            m += p.weight * gaussian_amplitude(x, p.a1, width_) *
                 gaussian_amplitude(x, p.b1, width_) * gaussian_overlap(p.a2, p.b2, width_);
        m = std::max(m, 0.0); // clip quadrature-level negative dust
        if (k > 0) cum1_[k] = cum1_[k - 1] + 0.5 * (prev + m) * dx1_;
        prev = m;
    }
    if (!(cum1_.back() > 0.0)) throw SingularError("PositionSampler: zero-norm branch");
}

double PositionSampler::conditional_cdf(const std::vector<double>& coef, std::size_t k) const {
    double f = 0.0;
    for (std::size_t p = 0; p < pairs_.size(); ++p) f += coef[p] * pairs_[p].cum2[k];
    return f;
}

std::pair<double, double> PositionSampler::sample(RandomStream& rng) const {
    const double u1 = rng.uniform01() * cum1_.back();
    const auto it = std::lower_bound(cum1_.begin() + 1, cum1_.end(), u1);
    const std::size_t k1 = static_cast<std::size_t>(it - cum1_.begin());
    const double lo = cum1_[k1 - 1];
    const double hi = cum1_[k1];
    const double frac1 = (hi > lo) ? (u1 - lo) / (hi - lo) : 0.0;
    const double x1 = x1lo_ + dx1_ * (static_cast<double>(k1 - 1) + frac1);

    std::vector<double> coef(pairs_.size());
    for (std::size_t p = 0; p < pairs_.size(); ++p)
        coef[p] = pairs_[p].weight * gaussian_amplitude(x1, pairs_[p].a1, width_) *
                  gaussian_amplitude(x1, pairs_[p].b1, width_);
    const double total = conditional_cdf(coef, n_ - 1);
    if (!(total > 0.0)) return {x1, 0.5 * (x2lo_ + x2hi_)};

    const double u2 = rng.uniform01() * total;
    std::size_t loK = 0, hiK = n_ - 1;
    while (hiK - loK > 1) {
        const std::size_t mid = (loK + hiK) / 2;
        if (conditional_cdf(coef, mid) < u2)
            loK = mid;
        else
            hiK = mid;
    }
    const double flo = conditional_cdf(coef, loK);
    const double fhi = conditional_cdf(coef, hiK);
    const double frac2 = (fhi > flo) ? (u2 - flo) / (fhi - flo) : 0.0;
    const double x2 = x2lo_ + dx2_ * (static_cast<double>(loK) + frac2);
    return {x1, x2};
}

std::pair<double, double> sample_positions(const HybridState& h, RandomStream& rng) {
    if (norm2(h) <= 0.0) throw SingularError("sample_positions: zero-norm branch");
    PositionSampler sampler(h);
    return sampler.sample(rng);
}

} // namespace wfsim::weakmeas
