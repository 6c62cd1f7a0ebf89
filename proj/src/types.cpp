#include "kbtrust/types.hpp"

#include <charconv>
#include <cmath>

namespace kbt {

namespace {

std::vector<std::string> split_bar(const std::string& text) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    auto pos = text.find('|', start);
    parts.push_back(text.substr(start, pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return parts;
}

// Pops a trailing "#<digits>" component, if any.
std::optional<std::uint32_t> take_shard(std::vector<std::string>& parts) {
  if (parts.size() < 2) return std::nullopt;
  const std::string& last = parts.back();
  if (last.size() < 2 || last[0] != '#') return std::nullopt;
  std::uint32_t shard = 0;
  auto [ptr, ec] = std::from_chars(last.data() + 1, last.data() + last.size(), shard);
  if (ec != std::errc{} || ptr != last.data() + last.size()) return std::nullopt;
  parts.pop_back();
  return shard;
}

void append_shard(std::string& out, const std::optional<std::uint32_t>& shard) {
  if (shard) out += "|#" + std::to_string(*shard);
}

}  // namespace

std::string SourceKey::str() const {
  std::string out = website;
  if (predicate) out += "|" + *predicate;
  if (webpage) out += "|" + *webpage;
  append_shard(out, shard);
  return out;
}

std::string ExtractorKey::str() const {
  std::string out = extractor;
  if (pattern) out += "|" + *pattern;
  if (predicate) out += "|" + *predicate;
  if (website) out += "|" + *website;
  append_shard(out, shard);
  return out;
}

SourceKey parse_source_key(const std::string& text) {
  auto parts = split_bar(text);
  SourceKey key;
  key.shard = take_shard(parts);
  if (parts.size() > 3 || parts[0].empty()) {
    throw std::invalid_argument("bad source key: " + text);
  }
  key.website = parts[0];
  if (parts.size() > 1) key.predicate = parts[1];
  if (parts.size() > 2) key.webpage = parts[2];
  return key;
}

ExtractorKey parse_extractor_key(const std::string& text) {
  auto parts = split_bar(text);
  ExtractorKey key;
  key.shard = take_shard(parts);
  if (parts.size() > 4 || parts[0].empty()) {
    throw std::invalid_argument("bad extractor key: " + text);
  }
  key.extractor = parts[0];
  if (parts.size() > 1) key.pattern = parts[1];
  if (parts.size() > 2) key.predicate = parts[2];
  if (parts.size() > 3) key.website = parts[3];
  return key;
}

void FusionConfig::validate() const {
  auto prob_open = [](double p) { return p > 0.0 && p < 1.0; };
  if (!(clamp_eps > 0.0 && clamp_eps < 0.5)) throw FusionError("clamp_eps must lie in (0, 0.5)");
  if (!(m_min < M_max)) throw FusionError("min size must be below max size");
  if (t_max < 1) throw FusionError("t_max must be at least 1");
  if (n_single < 1 || n_multi < 1) throw FusionError("domain size n must be at least 1");
  if (!prob_open(gamma)) throw FusionError("gamma must lie in (0, 1)");
  if (!prob_open(alpha0)) throw FusionError("alpha0 must lie in (0, 1)");
  if (!prob_open(default_A) || !prob_open(default_R) || !prob_open(default_Q)) {
    throw FusionError("default qualities must lie in (0, 1)");
  }
  if (confidence_threshold && !(*confidence_threshold >= 0.0 && *confidence_threshold <= 1.0)) {
    throw FusionError("confidence threshold must lie in [0, 1]");
  }
  if (workers < 1) throw FusionError("workers must be at least 1");
}

double FusionConfig::default_P() const {
  // Invert Q = gamma/(1-gamma) * (1-P)/P * R for P.
  const double k = gamma / (1.0 - gamma) * default_R / default_Q;
  return k / (1.0 + k);
}

double ValueDistribution::prob(const Value& v) const {
  for (const auto& [value, p] : observed) {
    if (value == v) return p;
  }
  return residual_each;
}

double ValueDistribution::total() const {
  double sum = 0.0;
  for (const auto& entry : observed) sum += entry.second;
  return sum + residual_each * static_cast<double>(unobserved_count);
}

double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double z = std::exp(x);
  return z / (1.0 + z);
}

double logit(double p) { return std::log(p) - std::log1p(-p); }

}  // namespace kbt
