#include "sdit/pgm.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace sdit {

void write_pgm(const std::string& path, const std::vector<double>& img, int w, int h,
               const std::vector<std::string>& comments) {
  if (static_cast<std::size_t>(w) * h != img.size())
    throw std::invalid_argument("write_pgm: " + std::to_string(img.size()) +
                                " values for " + std::to_string(w) + "x" +
                                std::to_string(h));
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_pgm: cannot open " + path);
  out << "P5\n";
  for (const auto& c : comments) {
    if (c.find('\n') != std::string::npos)
      throw std::invalid_argument("write_pgm: comment contains a newline");
    out << "# " << c << "\n";
  }
  out << w << " " << h << "\n255\n";
  for (double v : img) {
    const double clamped = std::clamp(v, -1.0, 1.0);
    const int byte = static_cast<int>(std::lround((clamped + 1.0) * 0.5 * 255.0));
    out.put(static_cast<char>(std::clamp(byte, 0, 255)));
  }
  if (!out) throw std::runtime_error("write_pgm: write failed for " + path);
}

namespace {

// next whitespace-delimited header token, skipping '#' comment lines
std::string pgm_token(std::istream& in) {
  std::string tok;
  int c = in.get();
  while (c >= 0) {
    if (c == '#') {
      while (c >= 0 && c != '\n') c = in.get();
    } else if (std::isspace(c)) {
      c = in.get();
    } else {
      break;
    }
  }
  while (c >= 0 && !std::isspace(c)) {
    tok.push_back(static_cast<char>(c));
    c = in.get();
  }
  return tok;
}

int pgm_int(std::istream& in) {
  const std::string tok = pgm_token(in);
  try {
    return std::stoi(tok);
  } catch (const std::exception&) {
    throw std::runtime_error("read_pgm: bad header token '" + tok + "'");
  }
}

}  // namespace

std::vector<double> read_pgm(const std::string& path, int& w, int& h) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_pgm: cannot open " + path);
  const std::string magic = pgm_token(in);
  w = pgm_int(in);
  h = pgm_int(in);
  const int maxval = pgm_int(in);
  if (magic != "P5" || w < 1 || h < 1 || maxval != 255)
    throw std::runtime_error("read_pgm: unsupported header in " + path);
  // pgm_token already consumed the single whitespace after maxval
  std::vector<double> img(static_cast<std::size_t>(w) * h);
  for (auto& v : img) {
    const int byte = in.get();
    if (byte < 0) throw std::runtime_error("read_pgm: truncated " + path);
    v = byte / 255.0 * 2.0 - 1.0;
  }
  return img;
}

}  // namespace sdit
