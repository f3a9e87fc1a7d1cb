#include "dmgmap/network.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>

namespace dmgmap {

std::string_view fusion_name(FusionMode m) { return m == FusionMode::Early ? "early" : "late"; }

FusionMode parse_fusion(std::string_view s) {
    if (s == "early") return FusionMode::Early;
    if (s == "late") return FusionMode::Late;
    throw ConfigError("unknown fusion mode '" + std::string(s) + "' (expected early or late)");
}

std::string_view input_mode_name(InputMode m) { return m == InputMode::PreOnly ? "pre_only" : "pre_and_post"; }

InputMode parse_input_mode(std::string_view s) {
    if (s == "pre_only") return InputMode::PreOnly;
    if (s == "pre_and_post") return InputMode::PreAndPost;
    throw ConfigError("unknown input mode '" + std::string(s) + "' (expected pre_only or pre_and_post)");
}

std::string_view task_name(TaskMode m) { return m == TaskMode::Joint ? "joint" : "two_step"; }

TaskMode parse_task(std::string_view s) {
    if (s == "joint") return TaskMode::Joint;
    if (s == "two_step") return TaskMode::TwoStep;
    throw ConfigError("unknown task mode '" + std::string(s) + "' (expected joint or two_step)");
}

std::string_view role_name(HeadRole r) {
    switch (r) {
    case HeadRole::Joint: return "joint";
    case HeadRole::Localization: return "loc";
    case HeadRole::Damage: return "dmg";
    }
    return "?";
}

HeadRole parse_role(std::string_view s) {
    if (s == "joint") return HeadRole::Joint;
    if (s == "loc") return HeadRole::Localization;
    if (s == "dmg") return HeadRole::Damage;
    throw DataError("unknown head role '" + std::string(s) + "'");
}

std::size_t ModelConfig::encoder_in() const noexcept {
    return fusion == FusionMode::Early && inputs == InputMode::PreAndPost ? 2 * epoch_channels : epoch_channels;
}

std::size_t ModelConfig::head_in() const noexcept { return late_pair() ? 2 * width2 : width2; }

std::size_t ModelConfig::param_count() const noexcept {
    return width1 * encoder_in() * 9 + width1 + width2 * width1 * 9 + width2 + num_classes() * head_in() +
           num_classes();
}

nlohmann::json ModelConfig::to_json() const {
    return {{"fusion", fusion_name(fusion)},
            {"inputs", input_mode_name(inputs)},
            {"role", role_name(role)},
            {"epoch_channels", epoch_channels},
            {"width1", width1},
            {"width2", width2}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.fusion = parse_fusion(j.at("fusion").get<std::string>());
    c.inputs = parse_input_mode(j.at("inputs").get<std::string>());
    c.role = parse_role(j.at("role").get<std::string>());
    c.epoch_channels = j.at("epoch_channels").get<std::size_t>();
    c.width1 = j.at("width1").get<std::size_t>();
    c.width2 = j.at("width2").get<std::size_t>();
    return c;
}

namespace {

template <class T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

struct Layout {
    std::size_t w1, b1, w2, b2, wh, bh, end;

    explicit Layout(const ModelConfig& c) {
        w1 = 0;
        b1 = w1 + c.width1 * c.encoder_in() * 9;
        w2 = b1 + c.width1;
        b2 = w2 + c.width2 * c.width1 * 9;
        wh = b2 + c.width2;
        bh = wh + c.num_classes() * c.head_in();
        end = bh + c.num_classes();
    }
};

// (C*9) x (H*W) patch matrix of a same-padded 3x3 convolution.
template <class T>
Mat<T> im2col(const T* in, std::size_t channels, std::size_t h, std::size_t w) {
    Mat<T> col = Mat<T>::Zero(static_cast<Eigen::Index>(channels * 9), static_cast<Eigen::Index>(h * w));
    const auto H = static_cast<std::ptrdiff_t>(h);
    const auto W = static_cast<std::ptrdiff_t>(w);
    for (std::size_t c = 0; c < channels; ++c) {
        const T* plane = in + c * h * w;
        for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
                T* row = col.row(static_cast<Eigen::Index>(c * 9 + ky * 3 + kx)).data();
                const std::ptrdiff_t dy = ky - 1;
                const std::ptrdiff_t dx = kx - 1;
                const std::ptrdiff_t x0 = std::max<std::ptrdiff_t>(0, -dx);
                const std::ptrdiff_t x1 = std::min<std::ptrdiff_t>(W, W - dx);
                for (std::ptrdiff_t y = 0; y < H; ++y) {
                    const std::ptrdiff_t sy = y + dy;
                    if (sy < 0 || sy >= H) {
                        continue;
                    }
                    std::memcpy(row + y * W + x0, plane + sy * W + x0 + dx, sizeof(T) * static_cast<std::size_t>(x1 - x0));
                }
            }
        }
    }
    return col;
}

template <class T>
void col2im_add(const Mat<T>& col, std::size_t channels, std::size_t h, std::size_t w, T* out) {
    const auto H = static_cast<std::ptrdiff_t>(h);
    const auto W = static_cast<std::ptrdiff_t>(w);
    for (std::size_t c = 0; c < channels; ++c) {
        T* plane = out + c * h * w;
        for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
                const T* row = col.row(static_cast<Eigen::Index>(c * 9 + ky * 3 + kx)).data();
                const std::ptrdiff_t dy = ky - 1;
                const std::ptrdiff_t dx = kx - 1;
                const std::ptrdiff_t x0 = std::max<std::ptrdiff_t>(0, -dx);
                const std::ptrdiff_t x1 = std::min<std::ptrdiff_t>(W, W - dx);
                for (std::ptrdiff_t y = 0; y < H; ++y) {
                    const std::ptrdiff_t sy = y + dy;
                    if (sy < 0 || sy >= H) {
                        continue;
                    }
                    T* dst = plane + sy * W + dx;
                    const T* src = row + y * W;
                    for (std::ptrdiff_t x = x0; x < x1; ++x) {
                        dst[x] += src[x];
                    }
                }
            }
        }
    }
}

template <class T>
struct BranchCache {
    Mat<T> col1;
    Mat<T> a1;
    Mat<T> col2;
    Mat<T> a2;
};

template <class T>
struct Params {
    Eigen::Map<const Mat<T>> w1, w2, wh;
    Eigen::Map<const Vec<T>> b1, b2, bh;

    Params(const std::vector<T>& p, const ModelConfig& c, const Layout& l)
        : w1(p.data() + l.w1, static_cast<Eigen::Index>(c.width1), static_cast<Eigen::Index>(c.encoder_in() * 9)),
          w2(p.data() + l.w2, static_cast<Eigen::Index>(c.width2), static_cast<Eigen::Index>(c.width1 * 9)),
          wh(p.data() + l.wh, static_cast<Eigen::Index>(c.num_classes()), static_cast<Eigen::Index>(c.head_in())),
          b1(p.data() + l.b1, static_cast<Eigen::Index>(c.width1)),
          b2(p.data() + l.b2, static_cast<Eigen::Index>(c.width2)),
          bh(p.data() + l.bh, static_cast<Eigen::Index>(c.num_classes())) {}
};

template <class T>
BranchCache<T> encode_branch(const Params<T>& p, const ModelConfig& cfg, const T* in, std::size_t channels,
                             std::size_t h, std::size_t w) {
    BranchCache<T> b;
    b.col1 = im2col(in, channels, h, w);
    b.a1.noalias() = p.w1 * b.col1;
    b.a1.colwise() += p.b1;
    b.a1 = b.a1.cwiseMax(T(0));
    b.col2 = im2col(b.a1.data(), cfg.width1, h, w);
    b.a2.noalias() = p.w2 * b.col2;
    b.a2.colwise() += p.b2;
    b.a2 = b.a2.cwiseMax(T(0));
    return b;
}

template <class T>
void backward_branch(const Params<T>& p, const ModelConfig& cfg, const BranchCache<T>& b, Mat<T> d, std::size_t h,
                     std::size_t w, T* grad, const Layout& l) {
    Eigen::Map<Mat<T>> gw1(grad + l.w1, p.w1.rows(), p.w1.cols());
    Eigen::Map<Mat<T>> gw2(grad + l.w2, p.w2.rows(), p.w2.cols());
    Eigen::Map<Vec<T>> gb1(grad + l.b1, p.b1.size());
    Eigen::Map<Vec<T>> gb2(grad + l.b2, p.b2.size());

    d = d.cwiseProduct((b.a2.array() > T(0)).template cast<T>().matrix());
    gw2.noalias() += d * b.col2.transpose();
    gb2 += d.rowwise().sum();
    const Mat<T> dcol2 = p.w2.transpose() * d;
    Mat<T> da1 = Mat<T>::Zero(b.a1.rows(), b.a1.cols());
    col2im_add(dcol2, cfg.width1, h, w, da1.data());
    da1 = da1.cwiseProduct((b.a1.array() > T(0)).template cast<T>().matrix());
    gw1.noalias() += da1 * b.col1.transpose();
    gb1 += da1.rowwise().sum();
}

} // namespace

template <class T>
Network<T>::Network(ModelConfig cfg) : cfg_(cfg), params_(cfg.param_count(), T(0)) {
    if (cfg_.width1 == 0 || cfg_.width2 == 0 || cfg_.epoch_channels == 0) {
        throw ConfigError("model widths and channel count must be positive");
    }
}

template <class T>
void Network<T>::set_params(std::vector<T> p) {
    if (p.size() != cfg_.param_count()) {
        throw DataError("parameter vector has " + std::to_string(p.size()) + " entries, model expects " +
                        std::to_string(cfg_.param_count()));
    }
    params_ = std::move(p);
}

template <class T>
void Network<T>::init(std::uint64_t seed) {
    const Layout l(cfg_);
    std::mt19937_64 rng(seed);
    auto fill = [&](std::size_t begin, std::size_t end, double fan_in) {
        std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
        for (std::size_t i = begin; i < end; ++i) {
            params_[i] = static_cast<T>(dist(rng));
        }
    };
    std::fill(params_.begin(), params_.end(), T(0));
    fill(l.w1, l.b1, static_cast<double>(cfg_.encoder_in() * 9));
    fill(l.w2, l.b2, static_cast<double>(cfg_.width1 * 9));
    fill(l.wh, l.bh, static_cast<double>(cfg_.head_in()));
}

template <class T>
void Network<T>::check_input(const ModelInput<T>& x) const {
    const std::size_t plane = x.height * x.width;
    if (plane == 0) {
        throw DataError("model input has zero size");
    }
    if (x.pre.size() != cfg_.epoch_channels * plane) {
        throw DataError("model input has " + std::to_string(x.pre.size() / plane) + " pre-event channels, model expects " +
                        std::to_string(cfg_.epoch_channels));
    }
    if (cfg_.inputs == InputMode::PreAndPost && x.post.size() != cfg_.epoch_channels * plane) {
        throw DataError("model input has " + std::to_string(x.post.size() / plane) +
                        " post-event channels, model expects " + std::to_string(cfg_.epoch_channels));
    }
}

template <class T>
std::vector<T> Network<T>::encode(std::span<const T> stack, std::size_t height, std::size_t width) const {
    if (stack.size() != cfg_.encoder_in() * height * width) {
        throw DataError("encoder input has the wrong channel count");
    }
    const Layout l(cfg_);
    const Params<T> p(params_, cfg_, l);
    const auto b = encode_branch(p, cfg_, stack.data(), cfg_.encoder_in(), height, width);
    return std::vector<T>(b.a2.data(), b.a2.data() + b.a2.size());
}

namespace {

template <class T>
struct ForwardState {
    BranchCache<T> first;
    BranchCache<T> second; // late fusion post branch
    Mat<T> logits;
};

template <class T>
ForwardState<T> run_forward(const Params<T>& p, const ModelConfig& cfg, const ModelInput<T>& x) {
    ForwardState<T> s;
    const std::size_t plane = x.height * x.width;
    if (cfg.late_pair()) {
        s.first = encode_branch(p, cfg, x.pre.data(), cfg.epoch_channels, x.height, x.width);
        s.second = encode_branch(p, cfg, x.post.data(), cfg.epoch_channels, x.height, x.width);
        const auto w2 = static_cast<Eigen::Index>(cfg.width2);
        s.logits.noalias() = p.wh.leftCols(w2) * s.first.a2;
        s.logits.noalias() += p.wh.rightCols(w2) * s.second.a2;
    } else {
        if (cfg.fusion == FusionMode::Early && cfg.inputs == InputMode::PreAndPost) {
            std::vector<T> stacked(2 * cfg.epoch_channels * plane);
            std::copy(x.pre.begin(), x.pre.end(), stacked.begin());
            std::copy(x.post.begin(), x.post.end(), stacked.begin() + static_cast<std::ptrdiff_t>(x.pre.size()));
            s.first = encode_branch(p, cfg, stacked.data(), 2 * cfg.epoch_channels, x.height, x.width);
        } else {
            s.first = encode_branch(p, cfg, x.pre.data(), cfg.epoch_channels, x.height, x.width);
        }
        s.logits.noalias() = p.wh * s.first.a2;
    }
    s.logits.colwise() += p.bh;
    return s;
}

} // namespace

template <class T>
std::vector<T> Network<T>::forward(const ModelInput<T>& x) const {
    check_input(x);
    const Layout l(cfg_);
    const Params<T> p(params_, cfg_, l);
    const auto s = run_forward(p, cfg_, x);
    return std::vector<T>(s.logits.data(), s.logits.data() + s.logits.size());
}

template <class T>
T Network<T>::loss_and_grad(const ModelInput<T>& x, std::span<const std::int32_t> target, T scale,
                            std::span<T> grad) const {
    check_input(x);
    const std::size_t plane = x.height * x.width;
    if (target.size() != plane) {
        throw DataError("target map does not match the input size");
    }
    if (grad.size() != params_.size()) {
        throw DataError("gradient buffer has the wrong length");
    }
    const Layout l(cfg_);
    const Params<T> p(params_, cfg_, l);
    const auto s = run_forward(p, cfg_, x);
    const auto K = static_cast<Eigen::Index>(cfg_.num_classes());

    Mat<T> dl = Mat<T>::Zero(K, static_cast<Eigen::Index>(plane));
    T loss = 0;
    bool any = false;
    for (std::size_t i = 0; i < plane; ++i) {
        const auto t = target[i];
        if (t < 0) {
            continue;
        }
        if (t >= K) {
            throw DataError("target class " + std::to_string(t) + " exceeds the head size");
        }
        any = true;
        const auto col = static_cast<Eigen::Index>(i);
        T m = s.logits(0, col);
        for (Eigen::Index k = 1; k < K; ++k) {
            m = std::max(m, s.logits(k, col));
        }
        T z = 0;
        for (Eigen::Index k = 0; k < K; ++k) {
            z += std::exp(s.logits(k, col) - m);
        }
        const T lse = m + std::log(z);
        loss += lse - s.logits(t, col);
        for (Eigen::Index k = 0; k < K; ++k) {
            dl(k, col) = scale * (std::exp(s.logits(k, col) - lse) - (k == t ? T(1) : T(0)));
        }
    }
    if (!any) {
        return T(0);
    }

    Eigen::Map<Mat<T>> gwh(grad.data() + l.wh, K, static_cast<Eigen::Index>(cfg_.head_in()));
    Eigen::Map<Vec<T>> gbh(grad.data() + l.bh, K);
    gbh += dl.rowwise().sum();
    if (cfg_.late_pair()) {
        const auto w2 = static_cast<Eigen::Index>(cfg_.width2);
        gwh.leftCols(w2).noalias() += dl * s.first.a2.transpose();
        gwh.rightCols(w2).noalias() += dl * s.second.a2.transpose();
        backward_branch(p, cfg_, s.first, Mat<T>(p.wh.leftCols(w2).transpose() * dl), x.height, x.width, grad.data(),
                        l);
        backward_branch(p, cfg_, s.second, Mat<T>(p.wh.rightCols(w2).transpose() * dl), x.height, x.width,
                        grad.data(), l);
    } else {
        gwh.noalias() += dl * s.first.a2.transpose();
        backward_branch(p, cfg_, s.first, Mat<T>(p.wh.transpose() * dl), x.height, x.width, grad.data(), l);
    }
    return scale * loss;
}

template class Network<float>;
template class Network<double>;

template <class T>
MaskedLoss masked_cross_entropy(const Network<T>& net, const ModelInput<T>& x, std::span<const std::int32_t> target,
                                std::vector<T>& grad) {
    grad.assign(net.params().size(), T(0));
    MaskedLoss r;
    r.valid_pixels = static_cast<std::size_t>(std::count_if(target.begin(), target.end(), [](auto t) { return t >= 0; }));
    if (r.valid_pixels == 0) {
        r.empty = true;
        return r;
    }
    const T scale = T(1) / static_cast<T>(r.valid_pixels);
    r.loss = static_cast<double>(net.loss_and_grad(x, target, scale, grad));
    return r;
}

template MaskedLoss masked_cross_entropy(const Network<float>&, const ModelInput<float>&, std::span<const std::int32_t>,
                                         std::vector<float>&);
template MaskedLoss masked_cross_entropy(const Network<double>&, const ModelInput<double>&,
                                         std::span<const std::int32_t>, std::vector<double>&);

// ---------------------------------------------------------------------------

Mask buffer_ring(const ClassMap& label, int radius) {
    const Mask buildings = label.building_mask();
    Mask ring = dilate_mask(buildings, radius);
    for (std::size_t i = 0; i < ring.bits.size(); ++i) {
        if (buildings.bits[i]) {
            ring.bits[i] = 0;
        }
    }
    return ring;
}

TargetMap make_target(const ClassMap& label, HeadRole role, int buffer_radius) {
    const auto values = label.values();
    TargetMap t(values.size(), -1);
    const Mask ring = buffer_radius > 0 ? buffer_ring(label, buffer_radius) : Mask(label.height(), label.width());
    for (std::size_t i = 0; i < values.size(); ++i) {
        const auto v = values[i];
        if (v == 255 || ring.bits[i]) {
            continue;
        }
        switch (role) {
        case HeadRole::Joint: t[i] = v; break;
        case HeadRole::Localization: t[i] = is_building_code(v) ? 1 : 0; break;
        case HeadRole::Damage:
            if (is_building_code(v)) {
                t[i] = v == 2 ? 1 : 0;
            }
            break;
        }
    }
    return t;
}

RasterGrid stack_epoch(const RasterGrid& s1, const RasterGrid& s2) {
    if (s1.height() != s2.height() || s1.width() != s2.width()) {
        throw DataError("S1 and S2 grids differ in size");
    }
    RasterGrid out(s1.channels() + s2.channels(), s1.height(), s1.width());
    auto dst = out.data();
    std::copy(s1.data().begin(), s1.data().end(), dst.begin());
    std::copy(s2.data().begin(), s2.data().end(), dst.begin() + static_cast<std::ptrdiff_t>(s1.data().size()));
    return out;
}

template <class V>
std::vector<V> dihedral(std::span<const V> data, std::size_t channels, std::size_t n, int k) {
    if (data.size() != channels * n * n) {
        throw DataError("dihedral: data is not C x N x N");
    }
    const int turns = k & 3;
    const bool flip = (k & 4) != 0;
    std::vector<std::size_t> source(n * n);
    for (std::size_t y = 0; y < n; ++y) {
        for (std::size_t x = 0; x < n; ++x) {
            std::size_t sy = y;
            std::size_t sx = flip ? n - 1 - x : x;
            for (int r = 0; r < turns; ++r) {
                const std::size_t ny = n - 1 - sx;
                sx = sy;
                sy = ny;
            }
            source[y * n + x] = sy * n + sx;
        }
    }
    std::vector<V> out(data.size());
    for (std::size_t c = 0; c < channels; ++c) {
        const V* src = data.data() + c * n * n;
        V* dst = out.data() + c * n * n;
        for (std::size_t i = 0; i < n * n; ++i) {
            dst[i] = src[source[i]];
        }
    }
    return out;
}

template std::vector<float> dihedral(std::span<const float>, std::size_t, std::size_t, int);
template std::vector<double> dihedral(std::span<const double>, std::size_t, std::size_t, int);
template std::vector<std::int32_t> dihedral(std::span<const std::int32_t>, std::size_t, std::size_t, int);
template std::vector<std::uint8_t> dihedral(std::span<const std::uint8_t>, std::size_t, std::size_t, int);

template <class T>
ModelInput<T> augment(const ModelInput<T>& x, int k) {
    if (x.height != x.width) {
        throw DataError("augmentation needs square inputs");
    }
    const std::size_t plane = x.height * x.width;
    ModelInput<T> out;
    out.height = x.height;
    out.width = x.width;
    out.pre = dihedral<T>(x.pre, x.pre.size() / plane, x.height, k);
    if (!x.post.empty()) {
        out.post = dihedral<T>(x.post, x.post.size() / plane, x.height, k);
    }
    return out;
}

template ModelInput<float> augment(const ModelInput<float>&, int);
template ModelInput<double> augment(const ModelInput<double>&, int);

} // namespace dmgmap
