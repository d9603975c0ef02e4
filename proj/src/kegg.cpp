#include "txembed/kegg.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <httplib.h>

namespace txembed::kegg {

namespace {

bool is_code(std::string_view code, char prefix) {
    return code.size() == 6 && code[0] == prefix &&
           std::all_of(code.begin() + 1, code.end(), [](char c) { return c >= '0' && c <= '9'; });
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

bool is_keyword(std::string_view token) {
    return !token.empty() &&
           std::all_of(token.begin(), token.end(), [](char c) { return (c >= 'A' && c <= 'Z') || c == '_'; });
}

// keyword -> content lines. Sub-sections ("  DISEASE", "  PATHWAY") are keyed by
// their own keyword.
struct Sections {
    std::map<std::string, std::vector<std::string>> by_keyword;
    bool terminated = false;

    const std::vector<std::string>& get(const std::string& k) const {
        static const std::vector<std::string> empty;
        auto it = by_keyword.find(k);
        return it == by_keyword.end() ? empty : it->second;
    }
};

Sections split_sections(std::string_view raw) {
    Sections s;
    std::string current;
    std::size_t pos = 0;
    while (pos <= raw.size()) {
        std::size_t nl = raw.find('\n', pos);
        std::string_view line = raw.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? raw.size() + 1 : nl + 1;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line == "///") {
            s.terminated = true;
            break;
        }
        if (trim(line).empty()) continue;
        std::string_view content;
        if (line[0] != ' ') {
            auto end = line.find(' ');
            current = std::string(line.substr(0, end));
            content = end == std::string_view::npos ? std::string_view{} : line.substr(end);
        } else if (line.size() > 2 && line.substr(0, 2) == "  " && line[2] != ' ') {
            auto rest = line.substr(2);
            auto end = rest.find(' ');
            auto token = rest.substr(0, end);
            if (is_keyword(token)) {
                current = std::string(token);
                content = end == std::string_view::npos ? std::string_view{} : rest.substr(end);
            } else {
                content = line;
            }
        } else {
            content = line;
        }
        if (current.empty()) continue;
        auto t = trim(content);
        auto& lines = s.by_keyword[current];
        if (!t.empty()) lines.emplace_back(t);
    }
    return s;
}

// "[HSA:5742 5743]" -> {"HSA:5742", "HSA:5743"}; filters by database prefix when given.
std::vector<std::string> bracket_ids(std::string_view line, std::string_view only_db = {}) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while ((pos = line.find('[', pos)) != std::string_view::npos) {
        auto close = line.find(']', pos);
        if (close == std::string_view::npos) break;
        auto inner = line.substr(pos + 1, close - pos - 1);
        pos = close + 1;
        auto colon = inner.find(':');
        if (colon == std::string_view::npos) continue;
        auto db = inner.substr(0, colon);
        if (!only_db.empty() && db != only_db) continue;
        std::istringstream ids{std::string(inner.substr(colon + 1))};
        std::string id;
        while (ids >> id) out.push_back(only_db.empty() ? std::string(db) + ":" + id : id);
    }
    return out;
}

std::string first_word(std::string_view line) {
    auto t = trim(line);
    return std::string(t.substr(0, t.find_first_of(" \t")));
}

std::string entry_code(const Sections& s) {
    const auto& entry = s.get("ENTRY");
    if (entry.empty()) throw ParseError("KEGG entry has no ENTRY line");
    return first_word(entry.front());
}

std::string entry_name(const Sections& s) {
    const auto& name = s.get("NAME");
    if (name.empty()) return {};
    std::string_view n = name.front();
    n = n.substr(0, n.find(';'));
    auto paren = n.find(" (");
    if (paren != std::string_view::npos) n = n.substr(0, paren);
    return std::string(trim(n));
}

}  // namespace

bool is_drug_code(std::string_view code) { return is_code(code, 'D'); }
bool is_disease_code(std::string_view code) { return is_code(code, 'H'); }

std::vector<std::string> normalize_snippets(std::string_view text) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= text.size(); ++i) {
        if (i == text.size() || text[i] == ',' || text[i] == ';') {
            auto piece = trim(text.substr(start, i - start));
            if (!piece.empty()) out.push_back(lower(piece));
            start = i + 1;
        }
    }
    return out;
}

KeggRecord parse_entry(std::string_view raw) {
    auto s = split_sections(raw);
    KeggRecord r;
    r.code = entry_code(s);
    if (!s.terminated) throw ParseError("KEGG entry " + r.code + " is missing the /// terminator");
    if (!is_drug_code(r.code)) throw ParseError("'" + r.code + "' is not a KEGG DRUG identifier");
    r.name = entry_name(s);
    for (const auto& line : s.get("DISEASE"))
        for (auto& id : bracket_ids(line, "DS")) r.diseases.push_back(std::move(id));
    for (const auto& line : s.get("TARGET")) {
        auto ids = bracket_ids(line);
        if (ids.empty()) ids.push_back(first_word(line));
        for (auto& id : ids) r.targets_pathways.push_back(std::move(id));
    }
    for (const auto& line : s.get("PATHWAY")) r.targets_pathways.push_back(first_word(line));
    std::string efficacy;
    for (const auto& line : s.get("EFFICACY")) efficacy += (efficacy.empty() ? "" : ", ") + line;
    r.efficacy = normalize_snippets(efficacy);
    for (const auto& line : s.get("CLASS")) {
        auto w = first_word(line);
        if (w.size() == 7 && w.starts_with("DG") &&
            std::all_of(w.begin() + 2, w.end(), [](char c) { return c >= '0' && c <= '9'; }))
            r.drug_class.push_back(w);
        else
            r.drug_class.push_back(lower(trim(line)));
    }
    return r;
}

KeggDisease parse_disease_entry(std::string_view raw) {
    auto s = split_sections(raw);
    KeggDisease d;
    d.code = entry_code(s);
    if (!s.terminated) throw ParseError("KEGG entry " + d.code + " is missing the /// terminator");
    if (!is_disease_code(d.code)) throw ParseError("'" + d.code + "' is not a KEGG DISEASE identifier");
    d.name = entry_name(s);
    for (const auto& line : s.get("DRUG"))
        for (auto& id : bracket_ids(line, "DR")) d.drugs.push_back(std::move(id));
    return d;
}

DiseaseIndex build_disease_index(std::span<const KeggDisease> diseases) {
    DiseaseIndex index;
    for (const auto& d : diseases) index[d.code].insert(d.drugs.begin(), d.drugs.end());
    return index;
}

std::vector<std::string> expand_linked_drugs(const KeggRecord& record, const DiseaseIndex& disease_index) {
    std::vector<std::string> tokens;
    for (const auto& disease : record.diseases) {
        tokens.push_back(disease);
        auto it = disease_index.find(disease);
        if (it == disease_index.end()) {
            std::clog << "warning: disease " << disease << " linked from " << record.code
                      << " is not in the disease index\n";
            continue;
        }
        tokens.insert(tokens.end(), it->second.begin(), it->second.end());
    }
    tokens.insert(tokens.end(), record.targets_pathways.begin(), record.targets_pathways.end());
    tokens.insert(tokens.end(), record.efficacy.begin(), record.efficacy.end());
    tokens.insert(tokens.end(), record.drug_class.begin(), record.drug_class.end());
    return tokens;
}

Client::Client(FetchOptions options) : options_(std::move(options)) {}

std::filesystem::path Client::cache_path(const std::string& code) const { return options_.cache_dir / code; }

std::size_t Client::network_requests() const {
    std::lock_guard lock(mutex_);
    return requests_;
}

std::string Client::fetch_entry(const std::string& code) {
    if (!is_drug_code(code) && !is_disease_code(code))
        throw Error("'" + code + "' is not a KEGG drug or disease identifier");
    const auto path = cache_path(code);
    {
        std::ifstream in(path, std::ios::binary);
        if (in) {
            std::stringstream ss;
            ss << in.rdbuf();
            return ss.str();
        }
    }
    if (!options_.allow_network) throw OfflineMiss("KEGG entry " + code + " is not cached and network access is off");

    std::lock_guard lock(mutex_);
    // Another caller may have filled the cache while we waited.
    if (std::ifstream in(path, std::ios::binary); in) {
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }
    const auto now = std::chrono::steady_clock::now();
    if (requests_ > 0 && now - last_request_ < options_.min_interval)
        std::this_thread::sleep_for(options_.min_interval - (now - last_request_));

    httplib::Client http(options_.base_url);
    http.set_connection_timeout(options_.timeout);
    http.set_read_timeout(options_.timeout);
    ++requests_;
    last_request_ = std::chrono::steady_clock::now();
    auto res = http.Get("/get/" + code);
    if (!res) throw FetchError("GET get/" + code + " failed: " + httplib::to_string(res.error()));
    if (res->status != 200)
        throw FetchError("GET get/" + code + " returned HTTP " + std::to_string(res->status), res->status);
    if (res->body.empty()) throw FetchError("GET get/" + code + " returned an empty body", res->status);

    std::filesystem::create_directories(options_.cache_dir);
    const auto tmp = path.string() + ".part";
    {
        std::ofstream out(tmp, std::ios::binary);
        out << res->body;
        if (!out) throw Error("cannot write cache file '" + tmp + "'");
    }
    std::filesystem::rename(tmp, path);
    return res->body;
}

std::string fetch_entry(const std::string& code, const std::filesystem::path& cache_dir, bool allow_network) {
    Client client({.cache_dir = cache_dir, .allow_network = allow_network});
    return client.fetch_entry(code);
}

std::map<std::string, std::vector<std::string>> collect_tokens(Client& client, std::span<const std::string> codes) {
    std::map<std::string, KeggRecord> drugs;
    std::set<std::string> disease_codes;
    for (const auto& code : codes) {
        if (drugs.contains(code)) continue;
        auto rec = parse_entry(client.fetch_entry(code));
        disease_codes.insert(rec.diseases.begin(), rec.diseases.end());
        drugs.emplace(code, std::move(rec));
    }
    std::vector<KeggDisease> diseases;
    for (const auto& h : disease_codes) {
        try {
            diseases.push_back(parse_disease_entry(client.fetch_entry(h)));
        } catch (const OfflineMiss& e) {
            std::clog << "warning: " << e.what() << '\n';
        }
    }
    const auto index = build_disease_index(diseases);
    std::map<std::string, std::vector<std::string>> out;
    for (const auto& [code, rec] : drugs) out.emplace(code, expand_linked_drugs(rec, index));
    return out;
}

}  // namespace txembed::kegg
