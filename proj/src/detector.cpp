#include "vpr/detector.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace vpr {

void write_trace_csv(const std::string& path, const std::vector<TraceRow>& rows) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << "episode,t,level,d_st,d_ch,cu_threshold,fired_ce,fired_cu,mask\n";
    char buf[256];
    for (const TraceRow& r : rows) {
        std::snprintf(buf, sizeof buf, "%d,%d,%d,%.17g,%.17g,%.17g,%d,%d,%d\n", r.episode, r.t,
                      r.level, r.d_st, r.d_ch, r.cu_threshold, r.fired_ce ? 1 : 0,
                      r.fired_cu ? 1 : 0, r.mask ? 1 : 0);
        out << buf;
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace vpr
