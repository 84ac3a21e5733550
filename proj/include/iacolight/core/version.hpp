#pragma once

namespace iacolight
{
    inline constexpr const char *kToolVersion = "0.1.0";
}
