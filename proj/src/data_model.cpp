#include "frailtycc/data_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include "frailtycc/errors.hpp"
#include "json.hpp"

namespace frailtycc {

std::size_t Dataset::max_relatives() const noexcept {
  std::size_t m = 0;
  for (const auto& s : matched_sets) {
    m = std::max({m, s.case_family.relatives.size(), s.control_family.relatives.size()});
  }
  return m;
}

double Dataset::max_time() const noexcept {
  double t = 0.0;
  auto visit = [&t](const FamilyRecord& f) {
    t = std::max(t, f.proband.time);
    for (const auto& r : f.relatives) t = std::max(t, r.time);
  };
  for (const auto& s : matched_sets) {
    visit(s.case_family);
    visit(s.control_family);
  }
  return t;
}

std::string Violation::describe() const {
  std::ostringstream os;
  os << "set " << set_index << ", " << (family == FamilyRole::Case ? "case" : "control") << " family";
  if (subject == -1) {
    os << ", proband";
  } else if (subject >= 0) {
    os << ", relative " << subject;
  }
  os << ": " << rule;
  return os.str();
}

std::vector<Violation> validate(const Dataset& dataset, const ValidationOptions& options) {
  std::vector<Violation> out;
  for (std::size_t r = 0; r < dataset.matched_sets.size(); ++r) {
    const MatchedSet& set = dataset.matched_sets[r];
    auto check_subject = [&](const Subject& s, FamilyRole role, long idx) {
      auto add = [&](std::string rule) { out.push_back({r, role, idx, std::move(rule)}); };
      if (!(s.time >= 0.0) || !std::isfinite(s.time)) add("time must be finite and >= 0");
      if (s.time > dataset.tau) add("time exceeds tau");
      if (s.event != 0 && s.event != 1) add("event must be 0 or 1");
      if (s.covariates.size() != dataset.p) add("covariate vector length differs from p");
      for (double z : s.covariates) {
        if (!std::isfinite(z)) {
          add("covariates must be finite");
          break;
        }
      }
    };
    auto check_family = [&](const FamilyRecord& f, FamilyRole role) {
      check_subject(f.proband, role, -1);
      if (f.relatives.empty()) out.push_back({r, role, -2, "family must have at least one relative"});
      if (f.relatives.size() > options.m_max) out.push_back({r, role, -2, "family has more than m_max relatives"});
      for (std::size_t j = 0; j < f.relatives.size(); ++j) check_subject(f.relatives[j], role, static_cast<long>(j));
      if (dataset.s0 && f.proband.time < *dataset.s0) out.push_back({r, role, -1, "proband time below s0"});
    };
    check_family(set.case_family, FamilyRole::Case);
    check_family(set.control_family, FamilyRole::Control);
    if (set.case_family.proband.event != 1) out.push_back({r, FamilyRole::Case, -1, "case proband must have the event"});
    if (set.control_family.proband.event != 0) {
      out.push_back({r, FamilyRole::Control, -1, "control proband must be censored"});
    }
    if (std::abs(set.case_family.proband.time - set.control_family.proband.time) > options.match_tolerance) {
      out.push_back({r, FamilyRole::Control, -1, "proband times differ by more than the match tolerance"});
    }
  }
  return out;
}

namespace {

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, const std::string& what, std::size_t line) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) throw DataError("cannot parse " + what + " '" + s + "'", line);
  return v;
}

struct Row {
  std::string set_id;
  FamilyRole family;
  bool proband;
  Subject subject;
  std::size_t line;
};

// Groups subject rows into matched sets in order of first appearance.
std::vector<MatchedSet> assemble(const std::vector<Row>& rows) {
  struct Partial {
    std::string id;
    MatchedSet set;
    bool has_case = false, has_control = false;
  };
  std::vector<Partial> sets;
  std::map<std::string, std::size_t> index;
  for (const Row& row : rows) {
    auto [it, inserted] = index.emplace(row.set_id, sets.size());
    if (inserted) sets.push_back({row.set_id, {}, false, false});
    Partial& part = sets[it->second];
    FamilyRecord& fam = row.family == FamilyRole::Case ? part.set.case_family : part.set.control_family;
    if (row.proband) {
      bool& seen = row.family == FamilyRole::Case ? part.has_case : part.has_control;
      if (seen) throw DataError("set '" + row.set_id + "' has a second proband in the same family", row.line);
      seen = true;
      fam.proband = row.subject;
    } else {
      fam.relatives.push_back(row.subject);
    }
  }
  std::vector<MatchedSet> out;
  out.reserve(sets.size());
  for (auto& part : sets) {
    if (!part.has_case) throw DataError("set '" + part.id + "' is missing its case proband");
    if (!part.has_control) throw DataError("set '" + part.id + "' is missing its control proband");
    out.push_back(std::move(part.set));
  }
  return out;
}

FamilyRole parse_family_role(const std::string& s, std::size_t line) {
  if (s == "case") return FamilyRole::Case;
  if (s == "control") return FamilyRole::Control;
  throw DataError("family_role must be 'case' or 'control', got '" + s + "'", line);
}

bool parse_subject_role(const std::string& s, std::size_t line) {
  if (s == "proband") return true;
  if (s == "relative") return false;
  throw DataError("subject_role must be 'proband' or 'relative', got '" + s + "'", line);
}

int parse_event(double v, std::size_t line) {
  if (v != 0.0 && v != 1.0) throw DataError("event must be 0 or 1", line);
  return static_cast<int>(v);
}

template <class Visit>
void for_each_subject(const Dataset& d, Visit&& visit) {
  for (std::size_t r = 0; r < d.matched_sets.size(); ++r) {
    const auto& set = d.matched_sets[r];
    const std::string id = std::to_string(r + 1);
    for (auto role : {FamilyRole::Case, FamilyRole::Control}) {
      const auto& fam = role == FamilyRole::Case ? set.case_family : set.control_family;
      const char* family = role == FamilyRole::Case ? "case" : "control";
      visit(id, family, "proband", fam.proband);
      for (const auto& rel : fam.relatives) visit(id, family, "relative", rel);
    }
  }
}

}  // namespace

Dataset load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");

  std::optional<double> tau, s0;
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (t[0] == '#') {
      const std::string body = trim(t.substr(1));
      const auto eq = body.find('=');
      if (eq != std::string::npos) {
        const std::string key = trim(body.substr(0, eq));
        const std::string val = trim(body.substr(eq + 1));
        if (key == "tau") tau = parse_double(val, "tau", line_no);
        if (key == "s0") s0 = parse_double(val, "s0", line_no);
      }
      continue;
    }
    header = split(t);
    break;
  }
  if (header.empty()) throw DataError("no records in '" + path.string() + "'");

  auto column = [&header](const std::string& name) -> long {
    const auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : static_cast<long>(it - header.begin());
  };
  const std::vector<std::string> required = {"set_id", "family_role", "subject_role", "time", "event"};
  std::vector<long> req_idx;
  for (const auto& name : required) {
    const long c = column(name);
    if (c < 0) throw DataError("schema error: missing column '" + name + "'", line_no);
    req_idx.push_back(c);
  }
  std::vector<long> z_idx;
  std::size_t z_declared = 0;
  for (const auto& h : header) {
    if (h.size() > 1 && h[0] == 'z' && std::all_of(h.begin() + 1, h.end(), ::isdigit)) ++z_declared;
  }
  for (std::size_t k = 1; k <= z_declared; ++k) {
    const long c = column("z" + std::to_string(k));
    if (c < 0) throw DataError("schema error: missing column 'z" + std::to_string(k) + "'", line_no);
    z_idx.push_back(c);
  }

  std::vector<Row> rows;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto fields = split(t);
    if (fields.size() != header.size()) {
      throw DataError("expected " + std::to_string(header.size()) + " fields, got " + std::to_string(fields.size()),
                      line_no);
    }
    Row row;
    row.line = line_no;
    row.set_id = fields[req_idx[0]];
    if (row.set_id.empty()) throw DataError("empty set_id", line_no);
    row.family = parse_family_role(fields[req_idx[1]], line_no);
    row.proband = parse_subject_role(fields[req_idx[2]], line_no);
    row.subject.time = parse_double(fields[req_idx[3]], "time", line_no);
    row.subject.event = parse_event(parse_double(fields[req_idx[4]], "event", line_no), line_no);
    for (std::size_t k = 0; k < z_idx.size(); ++k) {
      row.subject.covariates.push_back(parse_double(fields[z_idx[k]], "z" + std::to_string(k + 1), line_no));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError("no records in '" + path.string() + "'");

  Dataset d;
  d.matched_sets = assemble(rows);
  d.p = z_idx.size();
  d.tau = tau ? *tau : d.max_time();
  d.s0 = s0;
  return d;
}

void save_csv(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  if (dataset.tau != dataset.max_time()) out << "# tau=" << format_double(dataset.tau) << '\n';
  if (dataset.s0) out << "# s0=" << format_double(*dataset.s0) << '\n';
  out << "set_id,family_role,subject_role,time,event";
  for (std::size_t k = 1; k <= dataset.p; ++k) out << ",z" << k;
  out << '\n';
  for_each_subject(dataset, [&](const std::string& id, const char* family, const char* role, const Subject& s) {
    out << id << ',' << family << ',' << role << ',' << format_double(s.time) << ',' << s.event;
    for (double z : s.covariates) out << ',' << format_double(z);
    out << '\n';
  });
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

Dataset load_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("invalid JSON: ") + e.what());
  }
  if (!j.contains("subjects") || !j["subjects"].is_array() || j["subjects"].empty()) {
    throw DataError("no records in '" + path.string() + "'");
  }
  std::size_t p = 0;
  {
    const auto& first = j["subjects"][0];
    while (first.contains("z" + std::to_string(p + 1))) ++p;
  }
  std::vector<Row> rows;
  std::size_t idx = 0;
  for (const auto& s : j["subjects"]) {
    ++idx;
    try {
      for (const char* key : {"set_id", "family_role", "subject_role", "time", "event"}) {
        if (!s.contains(key)) throw DataError(std::string("schema error: missing field '") + key + "'", idx);
      }
      Row row;
      row.line = idx;
      row.set_id = s["set_id"].is_string() ? s["set_id"].get<std::string>() : s["set_id"].dump();
      row.family = parse_family_role(s["family_role"].get<std::string>(), idx);
      row.proband = parse_subject_role(s["subject_role"].get<std::string>(), idx);
      row.subject.time = s["time"].get<double>();
      row.subject.event = parse_event(s["event"].get<double>(), idx);
      for (std::size_t k = 1; k <= p; ++k) {
        const std::string key = "z" + std::to_string(k);
        if (!s.contains(key)) throw DataError("schema error: missing field '" + key + "'", idx);
        row.subject.covariates.push_back(s[key].get<double>());
      }
      rows.push_back(std::move(row));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(std::string("bad field type: ") + e.what(), idx);
    }
  }
  Dataset d;
  d.matched_sets = assemble(rows);
  d.p = p;
  d.tau = j.contains("tau") ? j["tau"].get<double>() : d.max_time();
  if (j.contains("s0") && !j["s0"].is_null()) d.s0 = j["s0"].get<double>();
  return d;
}

void save_json(const Dataset& dataset, const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  j["tau"] = dataset.tau;
  if (dataset.s0) j["s0"] = *dataset.s0;
  auto subjects = nlohmann::ordered_json::array();
  for_each_subject(dataset, [&](const std::string& id, const char* family, const char* role, const Subject& s) {
    nlohmann::ordered_json row;
    row["set_id"] = id;
    row["family_role"] = family;
    row["subject_role"] = role;
    row["time"] = s.time;
    row["event"] = s.event;
    for (std::size_t k = 0; k < s.covariates.size(); ++k) row["z" + std::to_string(k + 1)] = s.covariates[k];
    subjects.push_back(std::move(row));
  });
  j["subjects"] = std::move(subjects);
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << j.dump(1) << '\n';
}

Dataset load_dataset(const std::filesystem::path& path) {
  return path.extension() == ".json" ? load_json(path) : load_csv(path);
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  if (path.extension() == ".json") {
    save_json(dataset, path);
  } else {
    save_csv(dataset, path);
  }
}

}  // namespace frailtycc
