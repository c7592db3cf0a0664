#pragma once

#include <fstream>
#include <sstream>
#include <string>

namespace testdata {

inline std::string path(const std::string& name) { return std::string(STATELIFT_TEST_DATA) + "/" + name; }

inline std::string read(const std::string& name) {
    std::ifstream in(path(name), std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace testdata
