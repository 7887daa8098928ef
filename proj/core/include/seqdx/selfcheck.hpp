// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace seqdx {

struct SelfcheckItem {
    std::string name;
    bool pass = false;
    double max_dev = 0.0;
    double seconds = 0.0;
};

struct SelfcheckReport {
    std::vector<SelfcheckItem> items;

    bool all_pass() const {
        for (const auto& i : items) {
            if (!i.pass) return false;
        }
        return true;
    }
};

/// Harness hooks. perturb_grad runs on every autodiff gradient before it is
/// compared against the oracle, which lets a test simulate a broken backward
/// rule and assert that the corresponding check fails by name.
struct SelfcheckHooks {
    std::function<void(const std::string& check_name, const std::string& param_name,
                       std::vector<float>& grad)>
        perturb_grad;
};

/// Run the full oracle suite on small random instances: per-op gradient
/// checks against the finite-difference oracle, backpropagation through time,
/// a whole-model gradient check, accumulation equivalence, and a checkpoint
/// round-trip. Every gradient comparison uses relative error 1e-3 over
/// coordinates with |g| > 1e-4.
SelfcheckReport run_selfcheck(std::uint64_t seed, const SelfcheckHooks* hooks = nullptr);

}  // namespace seqdx
