#pragma once

#include <cmath>
#include <vector>

#include "elastoscan/errors.hpp"
#include "elastoscan/mesh.hpp"

namespace elastoscan {

struct IsotropicMaterial {
    double lambda = 0.0;   // Pa
    double mu = 0.0;       // Pa
    double rho = 0.0;      // kg/m^3
};

// Per-element Lame parameters and density.
struct MaterialField {
    std::vector<double> lambda;
    std::vector<double> mu;
    std::vector<double> rho;

    int element_count() const { return static_cast<int>(lambda.size()); }

    void validate() const {
        if (lambda.size() != mu.size() || lambda.size() != rho.size())
            throw InvalidMaterialError("material fields have inconsistent lengths");
        for (size_t e = 0; e < lambda.size(); ++e) {
            bool ok = std::isfinite(lambda[e]) && std::isfinite(mu[e]) && std::isfinite(rho[e]) &&
                      lambda[e] > 0.0 && mu[e] > 0.0 && rho[e] > 0.0;
            if (!ok)
                throw InvalidMaterialError("non-positive or non-finite material value at element " +
                                           std::to_string(e));
        }
    }
};

inline MaterialField uniform_material(const Mesh& mesh, const IsotropicMaterial& m) {
    MaterialField f;
    f.lambda.assign(mesh.element_count(), m.lambda);
    f.mu.assign(mesh.element_count(), m.mu);
    f.rho.assign(mesh.element_count(), m.rho);
    return f;
}

// Angular frequency in rad/s. Inputs given in Hz carry interpret_hz = true
// and are converted on construction.
struct FrequencyConfig {
    double omega = 0.0;
    bool interpret_hz = true;

    static FrequencyConfig from_hz(double f) {
        FrequencyConfig c;
        c.omega = 2.0 * M_PI * f;
        c.interpret_hz = true;
        return c;
    }

    static FrequencyConfig from_rad_s(double w) {
        FrequencyConfig c;
        c.omega = w;
        c.interpret_hz = false;
        return c;
    }

    void validate() const {
        if (!(omega != 0.0) || !std::isfinite(omega))
            throw ConfigError("angular frequency must be nonzero and finite");
    }
};

} // namespace elastoscan
