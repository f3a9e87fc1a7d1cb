#pragma once

#include "dmgmap/dataset.hpp"
#include "dmgmap/raster.hpp"

#include "json.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dmgmap {

enum class FusionMode { Early, Late };
enum class InputMode { PreOnly, PreAndPost };
enum class TaskMode { Joint, TwoStep };
/// What one network predicts: three classes, building vs background, or
/// damaged vs intact on building pixels.
enum class HeadRole { Joint, Localization, Damage };

std::string_view fusion_name(FusionMode m);
FusionMode parse_fusion(std::string_view s);
std::string_view input_mode_name(InputMode m);
InputMode parse_input_mode(std::string_view s);
std::string_view task_name(TaskMode m);
TaskMode parse_task(std::string_view s);
std::string_view role_name(HeadRole r);
HeadRole parse_role(std::string_view s);

/// S1 (VV, VH) followed by the 12 S2 bands.
inline constexpr std::size_t kEpochChannels = kS1Channels + kS2Channels;

struct ModelConfig {
    FusionMode fusion = FusionMode::Late;
    InputMode inputs = InputMode::PreAndPost;
    HeadRole role = HeadRole::Joint;
    std::size_t epoch_channels = kEpochChannels;
    std::size_t width1 = 16;
    std::size_t width2 = 32;

    std::size_t num_classes() const noexcept { return role == HeadRole::Joint ? 3 : 2; }
    std::size_t encoder_in() const noexcept;
    std::size_t head_in() const noexcept;
    std::size_t param_count() const noexcept;
    bool late_pair() const noexcept { return fusion == FusionMode::Late && inputs == InputMode::PreAndPost; }

    nlohmann::json to_json() const;
    static ModelConfig from_json(const nlohmann::json& j);
    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Normalised network input for one patch: pre and post stacks of
/// epoch_channels x height x width (post may be empty for pre-only models).
template <class T>
struct ModelInput {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<T> pre;
    std::vector<T> post;
};

/// Per-pixel training target, -1 = ignored.
using TargetMap = std::vector<std::int32_t>;

/// Two 3x3 same-padded convolutions with ReLU, then a 1x1 head. Late fusion
/// runs pre and post through the same encoder and concatenates the features.
template <class T>
class Network {
public:
    explicit Network(ModelConfig cfg);

    const ModelConfig& config() const noexcept { return cfg_; }
    std::vector<T>& params() noexcept { return params_; }
    const std::vector<T>& params() const noexcept { return params_; }
    void set_params(std::vector<T> p);

    /// He-normal weights, zero biases.
    void init(std::uint64_t seed);

    /// Encoder features (width2 x H x W) of one epoch stack.
    std::vector<T> encode(std::span<const T> stack, std::size_t height, std::size_t width) const;

    /// Logits, num_classes x H x W.
    std::vector<T> forward(const ModelInput<T>& x) const;

    /// Softmax cross-entropy over pixels with target >= 0. Adds
    /// scale * d(sum of pixel losses)/d(params) to `grad` and returns
    /// scale * (sum of pixel losses).
    T loss_and_grad(const ModelInput<T>& x, std::span<const std::int32_t> target, T scale, std::span<T> grad) const;

private:
    void check_input(const ModelInput<T>& x) const;

    ModelConfig cfg_;
    std::vector<T> params_;
};

extern template class Network<float>;
extern template class Network<double>;

struct MaskedLoss {
    double loss = 0.0;
    std::size_t valid_pixels = 0;
    bool empty = false; // no valid pixel: loss and gradient are zero
};

/// Mean cross-entropy over valid pixels with exact gradient written to `grad`
/// (resized and overwritten).
template <class T>
MaskedLoss masked_cross_entropy(const Network<T>& net, const ModelInput<T>& x, std::span<const std::int32_t> target,
                                std::vector<T>& grad);

/// Pixels in dilate(buildings, radius) minus the buildings themselves.
Mask buffer_ring(const ClassMap& label, int radius);

/// Role-specific training target: invalid and ring pixels are -1; the damage
/// role only scores true building pixels.
TargetMap make_target(const ClassMap& label, HeadRole role, int buffer_radius);

/// Stacks S1 then S2 for each epoch into one 14-channel grid.
RasterGrid stack_epoch(const RasterGrid& s1, const RasterGrid& s2);

/// The k-th element (0..7) of the dihedral group of the square applied to a
/// C x N x N channel-major array: k & 3 quarter turns, then a horizontal flip
/// when k & 4.
template <class V>
std::vector<V> dihedral(std::span<const V> data, std::size_t channels, std::size_t n, int k);

template <class T>
ModelInput<T> augment(const ModelInput<T>& x, int k);

} // namespace dmgmap
