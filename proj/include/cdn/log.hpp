#pragma once

#include <cstdlib>
#include <iostream>
#include <string>

namespace cdn {

// CDN_LOG={error,info,debug}; default info
inline int log_level() {
    static int level = [] {
        const char* env = std::getenv("CDN_LOG");
        if (!env) return 1;
        std::string s(env);
        if (s == "error") return 0;
        if (s == "debug") return 2;
        return 1;
    }();
    return level;
}

inline void log_error(const std::string& msg) { std::cerr << "[error] " << msg << "\n"; }

inline void log_info(const std::string& msg) {
    if (log_level() >= 1) std::cerr << "[info] " << msg << "\n";
}

inline void log_debug(const std::string& msg) {
    if (log_level() >= 2) std::cerr << "[debug] " << msg << "\n";
}

}  // namespace cdn
