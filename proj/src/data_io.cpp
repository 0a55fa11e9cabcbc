#include "treebridge/data_io.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "treebridge/errors.hpp"

namespace treebridge {

namespace {
constexpr double kPi = 3.14159265358979323846;

// scikit-learn two-moons: upper half circle and a lower half circle shifted
// to (1, 0.5); analytic mean of the noiseless union is (0.5, 0.25).
void gen_moons(Mat& out, double noise, Rng& rng) {
  const int n = out.rows;
  const int n_outer = (n + 1) / 2;
  for (int r = 0; r < n; ++r) {
    const double a = rng.uniform(0.0, kPi);
    double x, y;
    if (r < n_outer) {
      x = std::cos(a);
      y = std::sin(a);
    } else {
      x = 1.0 - std::cos(a);
      y = 0.5 - std::sin(a);
    }
    out(r, 0) = x - 0.5 + noise * rng.normal();
    out(r, 1) = y - 0.25 + noise * rng.normal();
  }
}

void gen_circle(Mat& out, double noise, Rng& rng) {
  for (int r = 0; r < out.rows; ++r) {
    const double a = rng.uniform(0.0, 2.0 * kPi);
    out(r, 0) = std::cos(a) + noise * rng.normal();
    out(r, 1) = std::sin(a) + noise * rng.normal();
  }
}

// Archimedean spiral r = theta/theta_max on theta in [0, 3pi]; analytic mean
// (-2/(9 pi^2), 1/(3 pi)).
void gen_spiral(Mat& out, double noise, Rng& rng) {
  const double theta_max = 3.0 * kPi;
  const double mean_x = -2.0 / (theta_max * theta_max);
  const double mean_y = 3.0 * kPi / (theta_max * theta_max);
  for (int r = 0; r < out.rows; ++r) {
    const double theta = rng.uniform(0.0, theta_max);
    const double rad = theta / theta_max;
    out(r, 0) = rad * std::cos(theta) - mean_x + noise * rng.normal();
    out(r, 1) = rad * std::sin(theta) - mean_y + noise * rng.normal();
  }
}
}  // namespace

int MarginalSource::dim() const {
  switch (kind) {
    case Kind::moons:
    case Kind::circle:
    case Kind::spiral:
      return 2;
    case Kind::gaussian:
      return gauss.d();
    case Kind::csv:
      return csv_rows.cols;
  }
  return 0;
}

MarginalSource::Kind parse_kind(const std::string& name) {
  if (name == "moons" || name == "moon") return MarginalSource::Kind::moons;
  if (name == "circle" || name == "circles") return MarginalSource::Kind::circle;
  if (name == "spiral") return MarginalSource::Kind::spiral;
  if (name == "gaussian") return MarginalSource::Kind::gaussian;
  if (name == "csv") return MarginalSource::Kind::csv;
  throw ConfigError("UnknownGenerator", "no marginal source named '" + name + "'");
}

Rng marginal_stream(const MarginalSource& src, Split split) {
  return derive_stream(src.seed,
                       split == Split::train ? StreamTag::data_train : StreamTag::data_eval);
}

Mat sample_marginal(const MarginalSource& src, int n, Rng& rng) {
  if (n < 1) throw ConfigError("DimensionMismatch", "need n >= 1 samples");
  Mat out(n, src.dim());
  switch (src.kind) {
    case MarginalSource::Kind::moons:
      gen_moons(out, src.noise, rng);
      break;
    case MarginalSource::Kind::circle:
      gen_circle(out, src.noise, rng);
      break;
    case MarginalSource::Kind::spiral:
      gen_spiral(out, src.noise, rng);
      break;
    case MarginalSource::Kind::gaussian: {
      Mat g = sample_gaussian(src.gauss, n, rng);
      out = g;
      break;
    }
    case MarginalSource::Kind::csv: {
      for (int r = 0; r < n; ++r) {
        const int src_row =
            static_cast<int>(rng.next_below(static_cast<uint64_t>(src.csv_rows.rows)));
        for (int k = 0; k < src.csv_rows.cols; ++k) out(r, k) = src.csv_rows(src_row, k);
      }
      return out;  // bootstrap rows are not rescaled
    }
  }
  if (src.kind != MarginalSource::Kind::gaussian && src.scale != 1.0)
    for (double& v : out.a) v *= src.scale;
  return out;
}

Mat load_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("FileOpen", "cannot read " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  int line_no = 0;
  bool maybe_header = true;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    bool numeric = true;
    while (std::getline(ss, cell, ',')) {
      try {
        size_t used = 0;
        const double v = std::stod(cell, &used);
        while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used])))
          ++used;
        if (used != cell.size()) {
          numeric = false;
          break;
        }
        row.push_back(v);
      } catch (const std::exception&) {
        numeric = false;
        break;
      }
    }
    if (!numeric) {
      if (maybe_header) {
        maybe_header = false;  // single auto-detected header row
        continue;
      }
      throw IoError("CsvParse", path + ": non-numeric value at row " + std::to_string(line_no));
    }
    maybe_header = false;
    if (!rows.empty() && row.size() != rows.front().size())
      throw IoError("CsvParse", path + ": ragged row at line " + std::to_string(line_no));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw IoError("EmptyFile", path + " has no data rows");
  Mat m(static_cast<int>(rows.size()), static_cast<int>(rows.front().size()));
  for (int r = 0; r < m.rows; ++r)
    for (int c = 0; c < m.cols; ++c) m(r, c) = rows[r][c];
  return m;
}

MarginalSource csv_marginal(const std::string& path, uint64_t seed) {
  MarginalSource src;
  src.kind = MarginalSource::Kind::csv;
  src.seed = seed;
  src.csv_rows = load_csv(path);
  src.csv_path = path;
  return src;
}

void write_csv(const std::string& path, const Mat& m, const std::vector<std::string>& header) {
  std::ofstream f(path);
  if (!f) throw IoError("FileOpen", "cannot write " + path);
  if (!header.empty()) {
    for (size_t i = 0; i < header.size(); ++i) f << (i ? "," : "") << header[i];
    f << '\n';
  }
  char buf[40];
  for (int r = 0; r < m.rows; ++r) {
    for (int c = 0; c < m.cols; ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", m(r, c));
      f << (c ? "," : "") << buf;
    }
    f << '\n';
  }
  if (!f) throw IoError("FileWrite", "short write to " + path);
}

}  // namespace treebridge
