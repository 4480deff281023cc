#pragma once

#include <cmath>
#include <filesystem>

#include <json.hpp>

#include "evkit/interp.hpp"
#include "evkit/io.hpp"

namespace evkit {

// Non-finite means serialize as JSON null; inf_count says why.
inline nlohmann::json report_to_json(const EvalReport& r) {
    nlohmann::json j;
    j["config"] = r.config;
    j["per_instance"] = nlohmann::json::array();
    for (const EvalEntry& e : r.per_instance) {
        nlohmann::json je;
        je["index"] = e.index;
        if (e.failed()) {
            je["error"] = e.error;
        } else {
            je["psnr"] = std::isfinite(e.psnr) ? nlohmann::json(e.psnr) : nlohmann::json();
            je["ssim"] = e.ssim;
            je["psnr_inf_count"] = e.inf_count;
        }
        j["per_instance"].push_back(std::move(je));
    }
    j["aggregate"] = {
        {"psnr_mean",
         std::isfinite(r.psnr_mean) ? nlohmann::json(r.psnr_mean) : nlohmann::json()},
        {"ssim_mean",
         std::isfinite(r.ssim_mean) ? nlohmann::json(r.ssim_mean) : nlohmann::json()},
        {"inf_count", r.inf_count},
        {"failed_count", r.failed_count},
    };
    return j;
}

inline void write_report(const EvalReport& r, const std::filesystem::path& path) {
    atomic_write_file(path, [&](std::ofstream& out) { out << report_to_json(r).dump(2) << '\n'; },
                      std::ios::out);
}

}  // namespace evkit
