#include "lgg/trial.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "lgg/errors.hpp"

namespace lgg {

void TrialSample::validate() const {
  if (signal.rank() != 2) throw DataError("trial signal must be channels x time");
  if (!signal.all_finite()) throw DataError("trial signal contains non-finite values");
  if (sample_rate <= 0.0) throw DataError("trial sample rate must be positive");
  if (!channel_names.empty() &&
      static_cast<std::int64_t>(channel_names.size()) != signal.extent(0)) {
    throw DataError("trial channel names do not match the signal row count");
  }
  for (const auto& [dim, value] : ratings) {
    if (value < 1.0 || value > 9.0) {
      throw DataError("trial rating '" + dim + "' = " + std::to_string(value) + " outside [1, 9]");
    }
  }
}

Label binarize_label(double rating, double threshold) {
  if (rating < 1.0 || rating > 9.0) {
    throw DataError("rating " + std::to_string(rating) + " outside [1, 9]");
  }
  return rating > threshold ? Label::High : Label::Low;
}

namespace {

constexpr char kMagic[4] = {'L', 'G', 'G', 'T'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

void put_str(std::string& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.append(s);
}

struct Reader {
  const std::string& buf;
  std::size_t pos = 0;
  std::string section = "header";

  void need(std::size_t n) {
    if (pos + n > buf.size()) throw DataError("trial file truncated in section '" + section + "'");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos++])) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos++])) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const std::uint32_t n = u32();
    if (n > 65535) throw DataError("trial file string length out of range in section '" + section + "'");
    need(n);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
};

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

void write_trial_file(const TrialSample& trial, const std::string& path) {
  trial.validate();
  std::string out;
  out.append(kMagic, 4);
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(trial.subject_id));
  put_u32(out, static_cast<std::uint32_t>(trial.trial_id));
  put_f64(out, trial.sample_rate);
  put_u32(out, static_cast<std::uint32_t>(trial.signal.extent(0)));
  put_u32(out, static_cast<std::uint32_t>(trial.signal.extent(1)));

  put_u32(out, static_cast<std::uint32_t>(trial.channel_names.size()));
  for (const auto& name : trial.channel_names) put_str(out, name);

  put_u32(out, static_cast<std::uint32_t>(trial.ratings.size()));
  for (const auto& [dim, value] : trial.ratings) {  // std::map: sorted, deterministic
    put_str(out, dim);
    put_f64(out, value);
  }

  for (std::int64_t i = 0; i < trial.signal.size(); ++i) put_f64(out, trial.signal[i]);

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot open trial file for writing: " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw DataError("failed writing trial file: " + path);
}

TrialSample read_trial_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open trial file: " + path);
  std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

  Reader r{buf};
  r.need(4);
  if (std::memcmp(buf.data(), kMagic, 4) != 0) {
    throw DataError("not a trial file (bad magic): " + path);
  }
  r.pos = 4;
  const std::uint32_t version = r.u32();
  if (version != kVersion) throw DataError("unsupported trial file version " + std::to_string(version));

  TrialSample t;
  t.subject_id = static_cast<int>(r.u32());
  t.trial_id = static_cast<int>(r.u32());
  t.sample_rate = r.f64();
  const std::uint32_t channels = r.u32();
  const std::uint32_t samples = r.u32();
  if (channels == 0 || samples == 0 || channels > 4096 ||
      static_cast<std::uint64_t>(channels) * samples > (1ull << 31)) {
    throw DataError("trial file extents out of range: " + std::to_string(channels) + " x " +
                    std::to_string(samples));
  }

  r.section = "channel names";
  const std::uint32_t name_count = r.u32();
  if (name_count != 0 && name_count != channels) {
    throw DataError("trial file channel name count does not match the channel extent");
  }
  for (std::uint32_t i = 0; i < name_count; ++i) t.channel_names.push_back(r.str());

  r.section = "ratings";
  const std::uint32_t rating_count = r.u32();
  if (rating_count > 64) throw DataError("trial file rating count out of range");
  for (std::uint32_t i = 0; i < rating_count; ++i) {
    const std::string dim = r.str();
    t.ratings[dim] = r.f64();
  }

  r.section = "signal";
  Tensor signal({static_cast<std::int64_t>(channels), static_cast<std::int64_t>(samples)});
  for (std::int64_t i = 0; i < signal.size(); ++i) signal[i] = r.f64();
  t.signal = std::move(signal);

  t.validate();
  return t;
}

TrialSample read_trial_csv(const std::string& csv_path, const std::string& meta_path) {
  std::ifstream csv(csv_path);
  if (!csv) throw DataError("cannot open csv file: " + csv_path);

  std::vector<std::string> channel_names;
  std::vector<std::vector<double>> rows;
  std::string line;
  bool header = true;
  while (std::getline(csv, line)) {
    line = trim(line);
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    if (header) {
      while (std::getline(ss, cell, ',')) channel_names.push_back(trim(cell));
      if (channel_names.empty()) throw DataError("csv header row is empty: " + csv_path);
      header = false;
      continue;
    }
    std::vector<double> vals;
    while (std::getline(ss, cell, ',')) {
      try {
        vals.push_back(std::stod(trim(cell)));
      } catch (const std::exception&) {
        throw DataError("csv has a non-numeric cell in " + csv_path);
      }
    }
    if (!rows.empty() && vals.size() != rows[0].size()) {
      throw DataError("csv rows have inconsistent lengths in " + csv_path);
    }
    rows.push_back(std::move(vals));
  }
  if (rows.size() != channel_names.size()) {
    throw DataError("csv expects one row per channel: " + std::to_string(channel_names.size()) +
                    " channels vs " + std::to_string(rows.size()) + " rows");
  }

  TrialSample t;
  t.channel_names = channel_names;
  const std::int64_t c = static_cast<std::int64_t>(rows.size());
  const std::int64_t l = static_cast<std::int64_t>(rows[0].size());
  Tensor signal({c, l});
  for (std::int64_t i = 0; i < c; ++i) {
    for (std::int64_t j = 0; j < l; ++j) signal[i * l + j] = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }
  t.signal = std::move(signal);

  std::ifstream meta(meta_path);
  if (!meta) throw DataError("cannot open metadata file: " + meta_path);
  while (std::getline(meta, line)) {
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) throw DataError("metadata line missing '=': " + line);
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "sample_rate") {
      t.sample_rate = std::stod(value);
    } else if (key == "subject_id") {
      t.subject_id = std::stoi(value);
    } else if (key == "trial_id") {
      t.trial_id = std::stoi(value);
    } else if (key.rfind("rating.", 0) == 0) {
      t.ratings[key.substr(7)] = std::stod(value);
    } else {
      throw DataError("metadata has unknown key '" + key + "'");
    }
  }

  t.validate();
  return t;
}

}  // namespace lgg
