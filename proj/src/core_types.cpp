#include "seqcr/core_types.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace seqcr {

Date parse_date(const std::string& iso) {
  int y = 0;
  unsigned m = 0;
  unsigned d = 0;
  char tail = 0;
  const bool shaped = iso.size() == 10 && iso[4] == '-' && iso[7] == '-';
  if (!shaped || std::sscanf(iso.c_str(), "%d-%u-%u%c", &y, &m, &d, &tail) != 3) {
    throw std::invalid_argument("malformed date '" + iso + "', expected YYYY-MM-DD");
  }
  Date date{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!date.ok()) throw std::invalid_argument("invalid calendar date '" + iso + "'");
  return date;
}

std::string format_date(const Date& d) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()),
                static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()));
  return buf;
}

int days_between(const Date& a, const Date& b) {
  return static_cast<int>((std::chrono::sys_days{a} - std::chrono::sys_days{b}).count());
}

Date add_days(const Date& d, int days) {
  return Date{std::chrono::sys_days{d} + std::chrono::days{days}};
}

std::string to_string(OpticalRange r) {
  switch (r) {
    case OpticalRange::RawDn: return "RAW_DN";
    case OpticalRange::ResNet: return "RESNET";
    case OpticalRange::Unit: return "UNIT";
  }
  return "?";
}

std::string to_string(SarRange r) {
  switch (r) {
    case SarRange::RawDb: return "RAW_DB";
    case SarRange::ResNet: return "RESNET";
    case SarRange::Unit: return "UNIT";
  }
  return "?";
}

OpticalRange parse_optical_range(const std::string& s) {
  if (s == "RAW_DN") return OpticalRange::RawDn;
  if (s == "RESNET") return OpticalRange::ResNet;
  if (s == "UNIT") return OpticalRange::Unit;
  throw std::invalid_argument("unknown optical range mode '" + s + "'");
}

SarRange parse_sar_range(const std::string& s) {
  if (s == "RAW_DB") return SarRange::RawDb;
  if (s == "RESNET") return SarRange::ResNet;
  if (s == "UNIT") return SarRange::Unit;
  throw std::invalid_argument("unknown SAR range mode '" + s + "'");
}

Interval bounds(OpticalRange r) {
  switch (r) {
    case OpticalRange::RawDn: return {0.0, 10000.0};
    case OpticalRange::ResNet: return {0.0, 5.0};
    case OpticalRange::Unit: return {0.0, 1.0};
  }
  return {0.0, 0.0};
}

Interval bounds(SarRange r) {
  switch (r) {
    case SarRange::RawDb: return {-32.5, 0.0};
    case SarRange::ResNet: return {0.0, 2.0};
    case SarRange::Unit: return {0.0, 1.0};
  }
  return {0.0, 0.0};
}

double count_coverage(const Tensor& mask) {
  if (mask.numel() == 0) return 0.0;
  std::size_t ones = 0;
  for (double v : mask.values()) ones += (v == 1.0);
  return static_cast<double>(ones) / static_cast<double>(mask.numel());
}

CloudMask make_mask(Tensor data) {
  if (data.ndim() != 2) throw std::invalid_argument("cloud mask must be 2-D, got " + shape_string(data.shape()));
  CloudMask m;
  m.coverage = count_coverage(data);
  m.data = std::move(data);
  return m;
}

namespace {

template <typename Image>
void check_raster(std::vector<std::string>& out, const std::string& where, const Image& img,
                  int channels, Interval range) {
  const auto& s = img.data.shape();
  if (s.size() != 3 || s[0] != channels) {
    out.push_back(where + ": expected " + std::to_string(channels) + " channels, got shape " + shape_string(s));
    return;
  }
  if (s[1] <= 0 || s[2] <= 0) {
    out.push_back(where + ": height and width must be positive");
    return;
  }
  for (double v : img.data.values()) {
    if (!std::isfinite(v) || v < range.lo || v > range.hi) {
      std::ostringstream os;
      os << where << ": value " << v << " outside declared range [" << range.lo << ", " << range.hi << "]";
      out.push_back(os.str());
      return;
    }
  }
}

}  // namespace

std::vector<std::string> validate(const PatchSeries& series) {
  std::vector<std::string> out;
  if (series.steps.empty()) {
    out.push_back("series: must contain at least one step");
    return out;
  }
  const auto& first = series.steps.front();
  for (std::size_t i = 0; i < series.steps.size(); ++i) {
    const TimeStep& step = series.steps[i];
    const std::string at = "step " + std::to_string(i);
    check_raster(out, at + " optical", step.optical, kOpticalBands, bounds(step.optical.range));
    check_raster(out, at + " sar", step.sar, kSarChannels, bounds(step.sar.range));

    const Tensor& m = step.mask.data;
    if (m.ndim() != 2) {
      out.push_back(at + " mask: expected 2-D grid, got " + shape_string(m.shape()));
    } else {
      bool binary = true;
      for (double v : m.values()) binary = binary && (v == 0.0 || v == 1.0);
      if (!binary) out.push_back(at + " mask: values must be binary (0 or 1)");
      if (step.mask.coverage != count_coverage(m)) {
        out.push_back(at + " mask: stored coverage does not equal fraction of ones");
      }
    }

    const int oh = step.optical.height(), ow = step.optical.width();
    if (step.sar.height() != oh || step.sar.width() != ow || step.mask.height() != oh ||
        step.mask.width() != ow) {
      out.push_back(at + ": sar, optical and mask must share height and width");
    }
    if (oh != first.optical.height() || ow != first.optical.width()) {
      out.push_back(at + ": footprint differs from step 0");
    }
    if (step.sar.patch_id != step.optical.patch_id) {
      out.push_back(at + ": sar and optical patch_id differ");
    }
    if (step.optical.patch_id != first.optical.patch_id) {
      out.push_back(at + ": patch_id differs from step 0");
    }
    const int dt = std::abs(days_between(step.sar.timestamp, step.optical.timestamp));
    if (dt > kMaxPairingDays) {
      out.push_back(at + ": S1/S2 pair is " + std::to_string(dt) + " days apart, exceeding the 14-day pairing bound");
    }
    if (i > 0 && !(series.steps[i - 1].optical.timestamp < step.optical.timestamp)) {
      out.push_back(at + ": optical timestamps must be strictly increasing");
    }
  }
  return out;
}

}  // namespace seqcr
