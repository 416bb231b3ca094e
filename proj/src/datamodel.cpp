#include "claimsfpr/datamodel.hpp"

#include "claimsfpr/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace claimsfpr {

namespace {

constexpr const char* kOrigin = "datamodel";

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.push_back(trim(line.substr(start)));
            break;
        }
        out.push_back(trim(line.substr(start, pos - start)));
        start = pos + 1;
    }
    return out;
}

std::vector<std::string_view> schema_columns(TableKind kind) {
    switch (kind) {
        case TableKind::prevalence: return {"sex", "year", "age_lo", "age_hi", "prevalence"};
        case TableKind::incidence: return {"sex", "year", "age_lo", "age_hi", "rate"};
        case TableKind::mortality: return {"sex", "year", "age", "rate"};
        case TableKind::mrr: return {"sex", "age", "ratio"};
        case TableKind::population: return {"sex", "age", "count"};
    }
    return {};
}

struct RowContext {
    std::string_view source;
    std::size_t line;
};

[[noreturn]] void fail_row(const RowContext& ctx, const std::string& message) {
    throw Error(kOrigin, fmt::format("{} row {}: {}", ctx.source, ctx.line, message));
}

double parse_number(std::string_view cell, std::string_view column, const RowContext& ctx) {
    double value = 0.0;
    const auto* first = cell.data();
    const auto* last = cell.data() + cell.size();
    if (!cell.empty() && cell.front() == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (cell.empty() || ec != std::errc{} || ptr != last || !std::isfinite(value)) {
        fail_row(ctx, fmt::format("non-numeric value '{}' in column '{}'", cell, column));
    }
    return value;
}

int parse_year(std::string_view cell, const RowContext& ctx) {
    const double v = parse_number(cell, "year", ctx);
    if (v != std::floor(v)) fail_row(ctx, fmt::format("year '{}' is not an integer", cell));
    return static_cast<int>(v);
}

void check_value_domain(TableKind kind, double value, const RowContext& ctx) {
    switch (kind) {
        case TableKind::prevalence:
            if (!(value > 0.0 && value < 1.0))
                fail_row(ctx, fmt::format("prevalence {} outside (0, 1)", value));
            break;
        case TableKind::incidence:
        case TableKind::mortality:
            if (!(value > 0.0)) fail_row(ctx, fmt::format("rate {} must be positive", value));
            break;
        case TableKind::mrr:
            if (!(value > 0.0)) fail_row(ctx, fmt::format("ratio {} must be positive", value));
            break;
        case TableKind::population:
            if (!(value >= 0.0)) fail_row(ctx, fmt::format("count {} must be nonnegative", value));
            break;
    }
}

bool value_in_domain(TableKind kind, double value) {
    switch (kind) {
        case TableKind::prevalence: return value > 0.0 && value < 1.0;
        case TableKind::incidence:
        case TableKind::mortality:
        case TableKind::mrr: return value > 0.0;
        case TableKind::population: return value >= 0.0;
    }
    return false;
}

std::string format_age_group(const ObservationRecord& r) {
    if (r.point_age || (r.age_hi && *r.age_hi == r.age_lo)) return fmt::format("{}", r.age_lo);
    if (!r.age_hi) return fmt::format("{}+", r.age_lo);
    return fmt::format("{}-{}", r.age_lo, *r.age_hi);
}

void check_contiguous(TableKind kind, const std::vector<ObservationRecord>& records,
                      std::vector<std::string>& issues) {
    std::map<std::pair<int, int>, std::vector<const ObservationRecord*>> strata;
    for (const auto& r : records) strata[{sex_index(r.sex), r.year.value_or(0)}].push_back(&r);
    for (auto& [key, rows] : strata) {
        std::sort(rows.begin(), rows.end(),
                  [](const auto* a, const auto* b) { return a->age_lo < b->age_lo; });
        const auto label = fmt::format("{} ({}{})", to_string(kind), to_string(static_cast<Sex>(key.first)),
                                       key.second != 0 ? fmt::format(", {}", key.second) : "");
        for (std::size_t k = 1; k < rows.size(); ++k) {
            const auto& prev = *rows[k - 1];
            const auto& cur = *rows[k];
            if (kind == TableKind::mrr) {
                if (cur.age_lo <= prev.age_lo)
                    issues.push_back(fmt::format("{}: duplicate age {}", label, cur.age_lo));
                continue;
            }
            if (!prev.age_hi) {
                issues.push_back(fmt::format("{}: open-ended group {} is not the last group", label,
                                             format_age_group(prev)));
                continue;
            }
            if (cur.age_lo != *prev.age_hi + 1.0) {
                issues.push_back(fmt::format("{}: age groups {} and {} are not contiguous", label,
                                             format_age_group(prev), format_age_group(cur)));
            }
        }
    }
}

}  // namespace

std::string_view to_string(Sex sex) {
    return sex == Sex::male ? "male" : "female";
}

Sex parse_sex(std::string_view text) {
    text = trim(text);
    if (text == "male" || text == "m" || text == "M") return Sex::male;
    if (text == "female" || text == "f" || text == "F") return Sex::female;
    throw Error(kOrigin, fmt::format("unknown sex '{}'", text));
}

std::string_view to_string(TableKind kind) {
    switch (kind) {
        case TableKind::prevalence: return "prevalence";
        case TableKind::incidence: return "incidence";
        case TableKind::mortality: return "mortality";
        case TableKind::mrr: return "mrr";
        case TableKind::population: return "population";
    }
    return "unknown";
}

std::string_view table_header(TableKind kind) {
    switch (kind) {
        case TableKind::prevalence: return "sex,year,age_lo,age_hi,prevalence";
        case TableKind::incidence: return "sex,year,age_lo,age_hi,rate";
        case TableKind::mortality: return "sex,year,age,rate";
        case TableKind::mrr: return "sex,age,ratio";
        case TableKind::population: return "sex,age,count";
    }
    return "";
}

double representative_age(double age_lo, std::optional<double> age_hi,
                          std::span<const AgeOverride> overrides) {
    for (const auto& o : overrides) {
        if (o.age_lo == age_lo && o.age_hi == age_hi) return o.age;
    }
    if (!age_hi) return age_lo + 2.5;
    return (age_lo + *age_hi + 1.0) / 2.0;
}

double representative_age(const ObservationRecord& record, std::span<const AgeOverride> overrides) {
    if (record.point_age) return record.age_lo;
    return representative_age(record.age_lo, record.age_hi, overrides);
}

std::vector<ObservationRecord> parse_table(std::string_view text, TableKind kind, std::string_view source) {
    // UTF-8 byte order mark.
    if (text.size() >= 3 && text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);

    std::vector<ObservationRecord> records;
    std::vector<int> column_of;
    const auto schema = schema_columns(kind);
    bool have_header = false;
    std::size_t line_no = 0;
    std::size_t pos = 0;

    while (pos <= text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        auto line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (trim(line).empty()) {
            if (end == text.size()) break;
            continue;
        }
        const auto fields = split_fields(line);
        const RowContext ctx{source, line_no};

        if (!have_header) {
            for (const auto& column : schema) {
                const auto it = std::find(fields.begin(), fields.end(), column);
                if (it == fields.end()) {
                    throw Error(kOrigin, fmt::format("{}: missing column '{}' (expected header '{}')", source,
                                                     column, table_header(kind)));
                }
                column_of.push_back(static_cast<int>(it - fields.begin()));
            }
            have_header = true;
            continue;
        }

        if (fields.size() < column_of.size() ||
            static_cast<std::size_t>(*std::max_element(column_of.begin(), column_of.end())) >= fields.size()) {
            fail_row(ctx, fmt::format("expected at least {} fields, found {}", column_of.size(), fields.size()));
        }
        auto cell = [&](std::size_t k) { return fields[static_cast<std::size_t>(column_of[k])]; };

        ObservationRecord r;
        try {
            r.sex = parse_sex(cell(0));
        } catch (const Error&) {
            fail_row(ctx, fmt::format("unknown sex '{}'", cell(0)));
        }
        switch (kind) {
            case TableKind::prevalence:
            case TableKind::incidence: {
                r.year = parse_year(cell(1), ctx);
                r.age_lo = parse_number(cell(2), "age_lo", ctx);
                if (!cell(3).empty()) r.age_hi = parse_number(cell(3), "age_hi", ctx);
                r.value = parse_number(cell(4), schema[4], ctx);
                break;
            }
            case TableKind::mortality: {
                r.year = parse_year(cell(1), ctx);
                r.age_lo = parse_number(cell(2), "age", ctx);
                r.age_hi = r.age_lo;
                r.value = parse_number(cell(3), "rate", ctx);
                break;
            }
            case TableKind::mrr: {
                r.age_lo = parse_number(cell(1), "age", ctx);
                r.age_hi = r.age_lo;
                r.point_age = true;
                r.value = parse_number(cell(2), "ratio", ctx);
                break;
            }
            case TableKind::population: {
                r.age_lo = parse_number(cell(1), "age", ctx);
                r.age_hi = r.age_lo;
                r.value = parse_number(cell(2), "count", ctx);
                break;
            }
        }
        if (r.age_lo < 0.0) fail_row(ctx, fmt::format("negative age {}", r.age_lo));
        if (r.age_hi && *r.age_hi < r.age_lo)
            fail_row(ctx, fmt::format("age_hi {} below age_lo {}", *r.age_hi, r.age_lo));
        check_value_domain(kind, r.value, ctx);
        records.push_back(r);
        if (end == text.size()) break;
    }
    if (!have_header) throw Error(kOrigin, fmt::format("{}: empty file, no header row", source));
    return records;
}

std::vector<ObservationRecord> load_table(const std::filesystem::path& path, TableKind kind) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(kOrigin, fmt::format("cannot open {} table '{}'", to_string(kind), path.string()));
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_table(buffer.str(), kind, path.string());
}

void write_table(const std::filesystem::path& path, TableKind kind, std::span<const ObservationRecord> records) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(kOrigin, fmt::format("cannot write '{}'", path.string()));
    out << table_header(kind) << '\n';
    for (const auto& r : records) {
        const auto sex = to_string(r.sex);
        switch (kind) {
            case TableKind::prevalence:
            case TableKind::incidence:
                out << fmt::format("{},{},{},{},{:.17g}\n", sex, r.year.value_or(0), r.age_lo,
                                   r.age_hi ? fmt::format("{}", *r.age_hi) : std::string{}, r.value);
                break;
            case TableKind::mortality:
                out << fmt::format("{},{},{},{:.17g}\n", sex, r.year.value_or(0), r.age_lo, r.value);
                break;
            case TableKind::mrr:
            case TableKind::population:
                out << fmt::format("{},{},{:.17g}\n", sex, r.age_lo, r.value);
                break;
        }
    }
    if (!out) throw Error(kOrigin, fmt::format("write failure on '{}'", path.string()));
}

std::vector<int> Dataset::prevalence_years() const {
    std::set<int> years;
    for (const auto& r : prevalence) {
        if (r.year) years.insert(*r.year);
    }
    return {years.begin(), years.end()};
}

std::optional<std::pair<int, int>> Dataset::survey_years() const {
    const auto years = prevalence_years();
    if (years.size() != 2) return std::nullopt;
    return std::pair{years[0], years[1]};
}

double Dataset::survey_gap() const {
    const auto years = survey_years();
    return years ? static_cast<double>(years->second - years->first) : 0.0;
}

ValidationReport validate_dataset(const Dataset& data, std::span<const double> age_grid,
                                  const ValidationOptions& options) {
    ValidationReport report;
    auto& issues = report.issues;

    const auto years = data.prevalence_years();
    if (years.size() != 2) {
        issues.push_back(fmt::format("prevalence must cover exactly two survey years, found {}", years.size()));
    }
    const double gap = data.survey_gap();

    struct Table {
        TableKind kind;
        const std::vector<ObservationRecord>* rows;
        bool required;
    };
    const std::array<Table, 5> tables{{
        {TableKind::prevalence, &data.prevalence, true},
        {TableKind::incidence, &data.incidence, true},
        {TableKind::mortality, &data.mortality, !options.mortality_supplied_as_fit},
        {TableKind::mrr, &data.mrr, true},
        {TableKind::population, &data.population, true},
    }};

    for (const auto& t : tables) {
        if (t.rows->empty()) {
            if (t.required) issues.push_back(fmt::format("{} table is empty", to_string(t.kind)));
            continue;
        }
        std::set<int> sexes;
        for (std::size_t k = 0; k < t.rows->size(); ++k) {
            const auto& r = (*t.rows)[k];
            sexes.insert(sex_index(r.sex));
            if (!value_in_domain(t.kind, r.value)) {
                issues.push_back(fmt::format("{} record {}: value {} out of domain", to_string(t.kind), k + 1, r.value));
            }
            if (r.age_hi && *r.age_hi < r.age_lo) {
                issues.push_back(fmt::format("{} record {}: age_hi below age_lo", to_string(t.kind), k + 1));
            }
        }
        if (sexes.size() != 2) issues.push_back(fmt::format("{} table does not cover both sexes", to_string(t.kind)));
        check_contiguous(t.kind, *t.rows, issues);
    }

    if (years.size() == 2) {
        for (Sex s : kSexes) {
            for (int y : years) {
                const bool present = std::any_of(data.prevalence.begin(), data.prevalence.end(),
                                                 [&](const auto& r) { return r.sex == s && r.year == y; });
                if (!present) issues.push_back(fmt::format("prevalence missing for {} in {}", to_string(s), y));
            }
        }
    }

    if (age_grid.empty()) {
        issues.push_back("estimation age grid is empty");
    } else {
        std::vector<double> grid(age_grid.begin(), age_grid.end());
        std::sort(grid.begin(), grid.end());
        for (std::size_t k = 1; k < grid.size(); ++k) {
            const double spacing = grid[k] - grid[k - 1];
            if (gap > 0.0 && !(spacing > gap)) {
                issues.push_back(fmt::format(
                    "age grid spacing {} between {} and {} is not coarser than the survey gap {}", spacing,
                    grid[k - 1], grid[k], gap));
            }
        }
        double lo = INFINITY, hi = -INFINITY;
        for (const auto& r : data.prevalence) {
            if (r.age_lo < options.prevalence_min_age) continue;
            const double a = representative_age(r);
            lo = std::min(lo, a);
            hi = std::max(hi, a);
        }
        if (gap > 0.0 && lo <= hi) {
            if (grid.front() - gap / 2.0 < lo || grid.back() + gap / 2.0 > hi) {
                issues.push_back(fmt::format(
                    "characteristics [{}, {}] leave the prevalence data age range [{}, {}]",
                    grid.front() - gap / 2.0, grid.back() + gap / 2.0, lo, hi));
            }
        }
    }

    if (!data.population.empty()) {
        for (Sex s : kSexes) {
            std::set<int> ages;
            for (const auto& r : data.population) {
                if (r.sex == s) ages.insert(static_cast<int>(r.age_lo));
            }
            for (int a = options.count_age_min; a <= options.count_age_max; ++a) {
                if (!ages.contains(a)) {
                    issues.push_back(fmt::format("population for {} misses age {}", to_string(s), a));
                    break;
                }
            }
        }
    }

    return report;
}

}  // namespace claimsfpr
