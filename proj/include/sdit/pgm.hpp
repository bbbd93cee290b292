#pragma once

#include <string>
#include <vector>

namespace sdit {

// Binary PGM (P5, maxval 255). Values are mapped between [-1, 1] and bytes.
// Comment lines (config echo, build version) go after the magic.
void write_pgm(const std::string& path, const std::vector<double>& img, int w, int h,
               const std::vector<std::string>& comments = {});
std::vector<double> read_pgm(const std::string& path, int& w, int& h);

}  // namespace sdit
