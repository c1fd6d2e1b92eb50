#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>

#include "sdvol/function_spec.hpp"
#include "sdvol/grid.hpp"

namespace sdvol {

/// Which price SDE a scenario drives.
///
/// The drift spec means different things per model:
///   supply/demand, market top/bottom, general coefficient: f = D/S - 1
///   valuation:     x_a = log P_a
///   stochastic_f:  the mean path E f(t); f itself follows df = E f'(t) dt + sigma_f dW
///   gbm_control:   mu(t)
enum class ModelKind {
    SupplyDemandSimple,
    SupplyDemandSymmetric,
    MarketTop,
    MarketBottom,
    GeneralMonomial,
    GeneralRatioPower,
    GeneralH,
    Valuation,
    StochasticF,
    GbmControl,
};

inline constexpr std::array kAllModels = {
    ModelKind::SupplyDemandSimple, ModelKind::SupplyDemandSymmetric, ModelKind::MarketTop,
    ModelKind::MarketBottom,       ModelKind::GeneralMonomial,       ModelKind::GeneralRatioPower,
    ModelKind::GeneralH,           ModelKind::Valuation,             ModelKind::StochasticF,
    ModelKind::GbmControl,
};

inline std::string_view model_name(ModelKind m) {
    switch (m) {
        case ModelKind::SupplyDemandSimple: return "supply_demand_simple";
        case ModelKind::SupplyDemandSymmetric: return "supply_demand_symmetric";
        case ModelKind::MarketTop: return "market_top";
        case ModelKind::MarketBottom: return "market_bottom";
        case ModelKind::GeneralMonomial: return "general_monomial";
        case ModelKind::GeneralRatioPower: return "general_ratio_power";
        case ModelKind::GeneralH: return "general_h";
        case ModelKind::Valuation: return "valuation";
        case ModelKind::StochasticF: return "stochastic_f";
        case ModelKind::GbmControl: return "gbm_control";
    }
    return "unknown";
}

inline std::optional<ModelKind> model_from_name(std::string_view name) {
    for (ModelKind m : kAllModels)
        if (model_name(m) == name) return m;
    return std::nullopt;
}

/// Models whose drift is f = D/S - 1 and which need D/S = 1 + f > 0.
inline bool uses_supply_demand_ratio(ModelKind m) {
    switch (m) {
        case ModelKind::SupplyDemandSimple:
        case ModelKind::SupplyDemandSymmetric:
        case ModelKind::MarketTop:
        case ModelKind::MarketBottom:
        case ModelKind::GeneralMonomial:
        case ModelKind::GeneralRatioPower:
        case ModelKind::GeneralH:
        case ModelKind::StochasticF: return true;
        default: return false;
    }
}

inline bool needs_power(ModelKind m) {
    return m == ModelKind::GeneralMonomial || m == ModelKind::GeneralRatioPower;
}

/// Full experiment definition. Immutable once built.
struct Scenario {
    ModelKind model = ModelKind::SupplyDemandSimple;
    FunctionSpec drift = FunctionSpec::constant(0.0);
    FunctionSpec sigma = FunctionSpec::constant(0.5);
    std::optional<FunctionSpec> sigma_f;  ///< stochastic_f only
    double y0 = 0.0;                      ///< initial log price
    TimeGrid grid{};
    std::size_t n_paths = 10000;
    std::uint64_t seed = 1;
    std::optional<int> power;  ///< p (monomial exponent q or ratio power p)

    bool sigma_is_constant() const noexcept { return sigma.is_constant(); }
    double sigma_constant() const { return sigma.params()[0]; }

    bool operator==(const Scenario&) const = default;
};

}  // namespace sdvol
