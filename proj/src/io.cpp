#include "pcm/io.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <system_error>

#include "pcm/error.hpp"

namespace pcm {

namespace {

std::string at_line(std::size_t line) { return "line " + std::to_string(line) + ": "; }

[[noreturn]] void parse_fail(std::size_t line, const std::string& what) { fail(ErrorCode::parse, at_line(line) + what); }

std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t end = line.find(sep, start);
        out.push_back(line.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start));
        if (end == std::string_view::npos) return out;
        start = end + 1;
    }
}

std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (pos < line.size()) {
        while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t')) ++pos;
        std::size_t end = pos;
        while (end < line.size() && line[end] != ' ' && line[end] != '\t') ++end;
        if (end > pos) out.push_back(line.substr(pos, end - pos));
        pos = end;
    }
    return out;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    return s;
}

// Yields non-blank lines with their 1-based numbers, CR stripped.
class LineReader {
public:
    explicit LineReader(std::istream& in) : in_(in) {}

    bool next(std::string& line) {
        while (std::getline(in_, line)) {
            ++number_;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (!trim(line).empty()) return true;
        }
        return false;
    }
    std::size_t number() const { return number_; }

private:
    std::istream& in_;
    std::size_t number_ = 0;
};

std::uint64_t parse_unsigned(std::string_view text, std::size_t line, std::string_view what) {
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size())
        parse_fail(line, std::string(what) + " is not an unsigned integer: '" + std::string(text) + "'");
    return v;
}

void write_row(std::ostream& out, std::string_view label, std::span<const double> values) {
    out << label;
    for (double v : values) out << ' ' << format_double(v);
    out << '\n';
}

void write_vector(std::ostream& out, std::string_view label, const Vector& v) {
    write_row(out, label, std::span<const double>(v.data(), static_cast<std::size_t>(v.size())));
}

struct Entry {
    std::size_t line;
    std::vector<std::string> tokens;
};

struct Section {
    std::string name;
    std::size_t line = 0;
    std::vector<Entry> entries;

    // The entry whose first token is `key`.
    const Entry& find(std::string_view key) const {
        for (const auto& e : entries)
            if (!e.tokens.empty() && e.tokens.front() == key) return e;
        parse_fail(line, "section [" + name + "] lacks key '" + std::string(key) + "'");
    }
    bool has(std::string_view key) const {
        for (const auto& e : entries)
            if (!e.tokens.empty() && e.tokens.front() == key) return true;
        return false;
    }
    double number(std::string_view key) const {
        const Entry& e = find(key);
        if (e.tokens.size() != 2) parse_fail(e.line, "'" + std::string(key) + "' takes one value");
        return parse_double(e.tokens[1], e.line, key);
    }
    long long integer(std::string_view key) const {
        const Entry& e = find(key);
        if (e.tokens.size() != 2) parse_fail(e.line, "'" + std::string(key) + "' takes one value");
        return parse_integer(e.tokens[1], e.line, key);
    }
    std::vector<double> numbers(std::string_view key) const {
        const Entry& e = find(key);
        std::vector<double> out;
        for (std::size_t k = 1; k < e.tokens.size(); ++k) out.push_back(parse_double(e.tokens[k], e.line, key));
        return out;
    }
};

std::vector<Section> read_sections(std::istream& in) {
    LineReader reader(in);
    std::vector<Section> sections(1);
    std::string line;
    while (reader.next(line)) {
        const std::string_view t = trim(line);
        if (t.front() == '#') continue;
        if (t.front() == '[') {
            if (t.back() != ']') parse_fail(reader.number(), "unterminated section header");
            sections.push_back({std::string(t.substr(1, t.size() - 2)), reader.number(), {}});
            continue;
        }
        Entry e{reader.number(), {}};
        for (auto tok : split_ws(t)) e.tokens.emplace_back(tok);
        sections.back().entries.push_back(std::move(e));
    }
    return sections;
}

const Section* find_section(const std::vector<Section>& sections, std::string_view name) {
    for (const auto& s : sections)
        if (s.name == name) return &s;
    return nullptr;
}

const Section& need_section(const std::vector<Section>& sections, std::string_view name) {
    const Section* s = find_section(sections, name);
    if (!s) fail(ErrorCode::parse, "fit report lacks section [" + std::string(name) + "]");
    return *s;
}

Vector to_vector(const std::vector<double>& v) {
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

std::string format_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

double parse_double(std::string_view text, std::size_t line, std::string_view what) {
    text = trim(text);
    if (!text.empty() && text.front() == '+') text.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || ec != std::errc() || ptr != text.data() + text.size())
        parse_fail(line, std::string(what) + " is not a number: '" + std::string(text) + "'");
    return v;
}

long long parse_integer(std::string_view text, std::size_t line, std::string_view what) {
    text = trim(text);
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || ec != std::errc() || ptr != text.data() + text.size())
        parse_fail(line, std::string(what) + " is not an integer: '" + std::string(text) + "'");
    return v;
}

void write_dataset_csv(std::ostream& out, const SurvivalData& data) {
    data.validate();
    out << "t,delta";
    for (std::size_t j = 1; j <= data.x_dim(); ++j) out << ",x" << j;
    for (std::size_t j = 1; j <= data.z_dim(); ++j) out << ",z" << j;
    out << '\n';
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto row = static_cast<Eigen::Index>(i);
        out << format_double(data.time[i]) << ',' << data.delta[i];
        for (Eigen::Index j = 0; j < data.x.cols(); ++j) out << ',' << format_double(data.x(row, j));
        for (Eigen::Index j = 0; j < data.z.cols(); ++j) out << ',' << format_double(data.z(row, j));
        out << '\n';
    }
}

SurvivalData read_dataset_csv(std::istream& in) {
    LineReader reader(in);
    std::string line;
    if (!reader.next(line)) fail(ErrorCode::parse, "dataset: empty input, expected a header line");
    const auto header = split(line, ',');
    const std::size_t header_line = reader.number();
    if (header.size() < 2 || trim(header[0]) != "t" || trim(header[1]) != "delta")
        parse_fail(header_line, "header must start with 't,delta'");
    std::size_t p = 0, q = 0;
    for (std::size_t k = 2; k < header.size(); ++k) {
        const std::string_view name = trim(header[k]);
        const bool is_x = !name.empty() && name.front() == 'x';
        const bool is_z = !name.empty() && name.front() == 'z';
        const std::size_t expected = is_x ? p + 1 : q + 1;
        if ((!is_x && !is_z) || (is_x && q > 0) ||
            name.substr(1) != std::to_string(expected))
            parse_fail(header_line, "unexpected column '" + std::string(name) + "'; expected x1..xp then z1..zq");
        (is_x ? p : q) += 1;
    }

    std::vector<double> time, xs, zs;
    std::vector<int> delta;
    while (reader.next(line)) {
        const std::size_t ln = reader.number();
        const auto fields = split(line, ',');
        if (fields.size() != header.size())
            parse_fail(ln, "expected " + std::to_string(header.size()) + " fields, found " + std::to_string(fields.size()));
        const double t = parse_double(fields[0], ln, "t");
        if (!(t > 0.0) || !std::isfinite(t)) parse_fail(ln, "t must be a positive finite time");
        const long long d = parse_integer(fields[1], ln, "delta");
        if (d != 0 && d != 1) parse_fail(ln, "delta must be 0 or 1");
        time.push_back(t);
        delta.push_back(static_cast<int>(d));
        for (std::size_t k = 0; k < p; ++k) xs.push_back(parse_double(fields[2 + k], ln, "x" + std::to_string(k + 1)));
        for (std::size_t k = 0; k < q; ++k) zs.push_back(parse_double(fields[2 + p + k], ln, "z" + std::to_string(k + 1)));
    }
    if (time.empty()) fail(ErrorCode::parse, "dataset: no data rows");

    SurvivalData data;
    const auto n = static_cast<Eigen::Index>(time.size());
    data.time = std::move(time);
    data.delta = std::move(delta);
    data.x = Eigen::Map<const RowMatrix>(xs.data(), n, static_cast<Eigen::Index>(p));
    data.z = Eigen::Map<const RowMatrix>(zs.data(), n, static_cast<Eigen::Index>(q));
    data.validate();
    return data;
}

TruthTable truth_of(const SimDataset& sim) {
    return {sim.true_pi, sim.true_susceptible, sim.train, sim.true_s_pop, sim.true_s_susceptible, sim.true_s_promotion};
}

void write_truth_csv(std::ostream& out, const TruthTable& truth) {
    out << "row,true_pi,true_cure,split,true_s_pop,true_s_susceptible,true_s_promotion\n";
    for (std::size_t i = 0; i < truth.size(); ++i) {
        out << i + 1 << ',' << format_double(truth.true_pi[i]) << ','
            << (truth.true_susceptible[i] ? "susceptible" : "cured") << ',' << (truth.train[i] ? "train" : "test") << ','
            << format_double(truth.true_s_pop[i]) << ',' << format_double(truth.true_s_susceptible[i]) << ','
            << format_double(truth.true_s_promotion[i]) << '\n';
    }
}

TruthTable read_truth_csv(std::istream& in) {
    LineReader reader(in);
    std::string line;
    if (!reader.next(line) || line != "row,true_pi,true_cure,split,true_s_pop,true_s_susceptible,true_s_promotion")
        fail(ErrorCode::parse, "truth sidecar: unexpected or missing header");
    TruthTable truth;
    while (reader.next(line)) {
        const std::size_t ln = reader.number();
        const auto f = split(line, ',');
        if (f.size() != 7) parse_fail(ln, "expected 7 fields, found " + std::to_string(f.size()));
        if (parse_integer(f[0], ln, "row") != static_cast<long long>(truth.size() + 1))
            parse_fail(ln, "rows must be numbered consecutively from 1");
        truth.true_pi.push_back(parse_double(f[1], ln, "true_pi"));
        const std::string_view cure = trim(f[2]), split_name = trim(f[3]);
        if (cure != "cured" && cure != "susceptible") parse_fail(ln, "true_cure must be 'cured' or 'susceptible'");
        if (split_name != "train" && split_name != "test") parse_fail(ln, "split must be 'train' or 'test'");
        truth.true_susceptible.push_back(cure == "susceptible" ? 1 : 0);
        truth.train.push_back(split_name == "train" ? 1 : 0);
        truth.true_s_pop.push_back(parse_double(f[4], ln, "true_s_pop"));
        truth.true_s_susceptible.push_back(parse_double(f[5], ln, "true_s_susceptible"));
        truth.true_s_promotion.push_back(parse_double(f[6], ln, "true_s_promotion"));
    }
    return truth;
}

void write_fit_report(std::ostream& out, const PcmFit& fit, const SurvivalData& data) {
    const EmState& diag = fit.diagnostics;
    require(static_cast<std::size_t>(diag.pi.size()) == data.size(), "fit report: diagnostics do not match the data");
    out << "# pcm fit report\n";
    out << "format_version " << kReportFormatVersion << '\n';
    out << "model " << to_string(fit.kind) << '\n';
    out << "converged " << (fit.converged ? 1 : 0) << '\n';
    out << "iterations " << diag.iteration << '\n';
    out << "subjects " << data.size() << '\n';
    out << "events " << data.num_events() << '\n';
    out << "x_dim " << data.x_dim() << '\n';
    out << "z_dim " << data.z_dim() << '\n';

    const EmConfig& c = fit.config;
    out << "\n[config]\n";
    out << "imputations " << c.imputations << '\n';
    out << "eps " << format_double(c.eps) << '\n';
    out << "max_iter " << c.max_iter << '\n';
    out << "seed " << c.seed << '\n';
    out << "cv_folds " << c.cv_folds << '\n';
    out << "kkt_tol " << format_double(c.kkt_tol) << '\n';
    write_row(out, "gamma_grid", c.gamma_grid);
    write_row(out, "cost_grid", c.cost_grid);
    if (c.kernel)
        out << "fixed_kernel " << format_double(c.kernel->gamma) << ' ' << format_double(c.kernel->cost) << '\n';
    else
        out << "fixed_kernel none\n";

    if (fit.kernel) {
        out << "\n[kernel]\n";
        out << "gamma " << format_double(fit.kernel->gamma) << '\n';
        out << "cost " << format_double(fit.kernel->cost) << '\n';
        out << "cv_accuracy " << format_double(fit.cv_accuracy) << '\n';
    }

    if (fit.standardization) {
        const Standardization& s = *fit.standardization;
        out << "\n[standardization]\n";
        write_vector(out, "x_mean", s.x_mean);
        write_vector(out, "x_sd", s.x_sd);
        write_vector(out, "z_mean", s.z_mean);
        write_vector(out, "z_sd", s.z_sd);
    }

    out << "\n[beta]\n";
    const bool with_se = fit.bootstrap.has_value();
    out << (with_se ? "# index estimate se\n" : "# index estimate\n");
    for (Eigen::Index j = 0; j < fit.latency.beta.size(); ++j) {
        out << "z" << j + 1 << ' ' << format_double(fit.latency.beta[j]);
        if (with_se) out << ' ' << format_double(fit.bootstrap->beta_se[j]);
        out << '\n';
    }

    out << "\n[baseline]\n# time s0\n";
    const auto& times = fit.latency.baseline.times();
    const auto& values = fit.latency.baseline.values();
    for (std::size_t j = 0; j < times.size(); ++j) out << format_double(times[j]) << ' ' << format_double(values[j]) << '\n';

    out << "\n[trace]\n# iteration squared_change\n";
    for (std::size_t k = 0; k < fit.trace.size(); ++k) out << k + 1 << ' ' << format_double(fit.trace[k]) << '\n';

    if (const auto* model = std::get_if<IncidenceModel>(&fit.incidence)) {
        out << "\n[incidence]\nmembers " << model->m() << '\n';
        for (std::size_t k = 0; k < model->m(); ++k) {
            const IncidenceMember& member = model->members[k];
            const SvmModel& svm = member.svm;
            out << "\n[member " << k + 1 << "]\n";
            out << "threshold " << format_double(svm.threshold) << '\n';
            out << "platt_slope " << format_double(member.platt.slope) << '\n';
            out << "platt_intercept " << format_double(member.platt.intercept) << '\n';
            out << "support_vectors " << svm.size() << '\n';
            out << "# sv coef label row x...\n";
            for (std::size_t i = 0; i < svm.size(); ++i) {
                const auto r = static_cast<Eigen::Index>(i);
                out << "sv " << format_double(svm.dual_coefs[r]) << ' ' << svm.labels[i] << ' ' << svm.support_index[i] + 1;
                for (Eigen::Index j = 0; j < svm.support_points.cols(); ++j)
                    out << ' ' << format_double(svm.support_points(r, j));
                out << '\n';
            }
        }
    } else {
        out << "\n[logit]\n";
        write_vector(out, "gamma", std::get<LogitParams>(fit.incidence).gamma);
    }

    out << "\n[subjects]\n# row t delta pi w n_expect\n";
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        out << i + 1 << ' ' << format_double(data.time[i]) << ' ' << data.delta[i] << ' ' << format_double(diag.pi[r])
            << ' ' << format_double(diag.w[r]) << ' ' << format_double(diag.n_expect[r]) << '\n';
    }

    if (fit.bootstrap) {
        const BootstrapResult& b = *fit.bootstrap;
        out << "\n[bootstrap]\n";
        out << "replicates " << b.replicates << '\n';
        out << "successes " << b.successes << '\n';
        out << "failures " << b.failures << '\n';
        out << "not_converged " << b.not_converged << '\n';
        write_vector(out, "beta_se", b.beta_se);
    }
}

PcmFit read_fit_report(std::istream& in) {
    const std::vector<Section> sections = read_sections(in);
    const Section& head = sections.front();
    if (head.integer("format_version") != kReportFormatVersion)
        fail(ErrorCode::parse, "fit report: unsupported format_version");

    PcmFit fit;
    const std::string& model = head.find("model").tokens.at(1);
    if (model == to_string(IncidenceKind::svm))
        fit.kind = IncidenceKind::svm;
    else if (model == to_string(IncidenceKind::logit))
        fit.kind = IncidenceKind::logit;
    else
        parse_fail(head.find("model").line, "unknown model '" + model + "'");
    fit.converged = head.integer("converged") != 0;
    const auto n = static_cast<std::size_t>(head.integer("subjects"));
    const auto p = static_cast<Eigen::Index>(head.integer("x_dim"));
    const auto q = static_cast<Eigen::Index>(head.integer("z_dim"));

    const Section& config = need_section(sections, "config");
    EmConfig& c = fit.config;
    c.imputations = static_cast<int>(config.integer("imputations"));
    c.eps = config.number("eps");
    c.max_iter = static_cast<int>(config.integer("max_iter"));
    {
        const Entry& e = config.find("seed");
        c.seed = parse_unsigned(e.tokens.at(1), e.line, "seed");
    }
    c.cv_folds = static_cast<int>(config.integer("cv_folds"));
    c.kkt_tol = config.number("kkt_tol");
    c.gamma_grid = config.numbers("gamma_grid");
    c.cost_grid = config.numbers("cost_grid");
    {
        const Entry& e = config.find("fixed_kernel");
        if (e.tokens.size() == 3)
            c.kernel = KernelSpec{parse_double(e.tokens[1], e.line, "gamma"), parse_double(e.tokens[2], e.line, "cost")};
        else if (e.tokens.size() != 2 || e.tokens[1] != "none")
            parse_fail(e.line, "fixed_kernel takes 'none' or a gamma and a cost");
    }

    if (const Section* kernel = find_section(sections, "kernel")) {
        fit.kernel = KernelSpec{kernel->number("gamma"), kernel->number("cost")};
        fit.cv_accuracy = kernel->number("cv_accuracy");
    }

    if (const Section* s = find_section(sections, "standardization")) {
        fit.standardization = Standardization{to_vector(s->numbers("x_mean")), to_vector(s->numbers("x_sd")),
                                              to_vector(s->numbers("z_mean")), to_vector(s->numbers("z_sd"))};
    }

    const Section& beta = need_section(sections, "beta");
    if (static_cast<Eigen::Index>(beta.entries.size()) != q) parse_fail(beta.line, "[beta] needs one row per z column");
    fit.latency.beta.resize(q);
    for (Eigen::Index j = 0; j < q; ++j) {
        const Entry& e = beta.entries[static_cast<std::size_t>(j)];
        if (e.tokens.size() < 2) parse_fail(e.line, "beta row needs a name and an estimate");
        fit.latency.beta[j] = parse_double(e.tokens[1], e.line, "beta");
    }

    const Section& baseline = need_section(sections, "baseline");
    std::vector<double> times, values;
    for (const Entry& e : baseline.entries) {
        if (e.tokens.size() != 2) parse_fail(e.line, "baseline rows hold a time and a survival value");
        times.push_back(parse_double(e.tokens[0], e.line, "time"));
        values.push_back(parse_double(e.tokens[1], e.line, "s0"));
    }
    fit.latency.baseline = BaselineSurvival(std::move(times), std::move(values));

    for (const Entry& e : need_section(sections, "trace").entries) {
        if (e.tokens.size() != 2) parse_fail(e.line, "trace rows hold an iteration and a change");
        fit.trace.push_back(parse_double(e.tokens[1], e.line, "change"));
    }

    if (fit.kind == IncidenceKind::svm) {
        const Section& inc = need_section(sections, "incidence");
        const auto members = static_cast<std::size_t>(inc.integer("members"));
        require(fit.kernel.has_value(), "fit report: an SVM fit needs a [kernel] section");
        IncidenceModel model;
        for (std::size_t k = 1; k <= members; ++k) {
            const Section& s = need_section(sections, "member " + std::to_string(k));
            IncidenceMember member;
            member.svm.threshold = s.number("threshold");
            member.svm.kernel = *fit.kernel;
            member.platt = {s.number("platt_slope"), s.number("platt_intercept")};
            const auto count = static_cast<Eigen::Index>(s.integer("support_vectors"));
            member.svm.support_points.resize(count, p);
            member.svm.dual_coefs.resize(count);
            Eigen::Index r = 0;
            for (const Entry& e : s.entries) {
                if (e.tokens.front() != "sv") continue;
                if (r >= count || static_cast<Eigen::Index>(e.tokens.size()) != 4 + p)
                    parse_fail(e.line, "support vector row has the wrong shape");
                member.svm.dual_coefs[r] = parse_double(e.tokens[1], e.line, "coef");
                const long long label = parse_integer(e.tokens[2], e.line, "label");
                if (label != 1 && label != -1) parse_fail(e.line, "label must be +1 or -1");
                member.svm.labels.push_back(static_cast<int>(label));
                member.svm.support_index.push_back(static_cast<std::size_t>(parse_integer(e.tokens[3], e.line, "row") - 1));
                for (Eigen::Index j = 0; j < p; ++j)
                    member.svm.support_points(r, j) = parse_double(e.tokens[static_cast<std::size_t>(4 + j)], e.line, "x");
                ++r;
            }
            if (r != count) parse_fail(s.line, "member " + std::to_string(k) + " lists the wrong number of support vectors");
            model.members.push_back(std::move(member));
        }
        fit.incidence = std::move(model);
    } else {
        const Section& logit = need_section(sections, "logit");
        const Vector gamma = to_vector(logit.numbers("gamma"));
        if (gamma.size() != p + 1) parse_fail(logit.line, "logit gamma needs an intercept plus one entry per x column");
        fit.incidence = LogitParams{gamma};
    }

    const Section& subjects = need_section(sections, "subjects");
    if (subjects.entries.size() != n) parse_fail(subjects.line, "[subjects] row count disagrees with 'subjects'");
    EmState& diag = fit.diagnostics;
    diag.pi.resize(static_cast<Eigen::Index>(n));
    diag.w.resize(static_cast<Eigen::Index>(n));
    diag.n_expect.resize(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const Entry& e = subjects.entries[i];
        if (e.tokens.size() != 6) parse_fail(e.line, "subject rows hold row t delta pi w n_expect");
        const auto r = static_cast<Eigen::Index>(i);
        diag.pi[r] = parse_double(e.tokens[3], e.line, "pi");
        diag.w[r] = parse_double(e.tokens[4], e.line, "w");
        diag.n_expect[r] = parse_double(e.tokens[5], e.line, "n_expect");
    }
    diag.iteration = static_cast<int>(head.integer("iterations"));
    diag.latency = fit.latency;

    if (const Section* b = find_section(sections, "bootstrap")) {
        BootstrapResult boot;
        boot.replicates = static_cast<int>(b->integer("replicates"));
        boot.successes = static_cast<int>(b->integer("successes"));
        boot.failures = static_cast<int>(b->integer("failures"));
        boot.not_converged = static_cast<int>(b->integer("not_converged"));
        boot.beta_se = to_vector(b->numbers("beta_se"));
        fit.bootstrap = std::move(boot);
    }
    return fit;
}

void write_roc_tsv(std::ostream& out, const RocCurve& curve) {
    out << "fpr\ttpr\n";
    for (std::size_t k = 0; k < curve.fpr.size(); ++k)
        out << format_double(curve.fpr[k]) << '\t' << format_double(curve.tpr[k]) << '\n';
}

void write_pi_surface_tsv(std::ostream& out, const PcmFit& fit, std::size_t x_dim, double lo, double hi, int points) {
    require(x_dim >= 2, "pi surface: needs at least two covariates");
    require(points >= 2 && hi > lo, "pi surface: needs at least two grid points on a non-empty range");
    out << "x1\tx2\tpi_hat\n";
    Eigen::RowVectorXd x = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(x_dim));
    for (int a = 0; a < points; ++a) {
        for (int b = 0; b < points; ++b) {
            x[0] = lo + (hi - lo) * a / (points - 1);
            x[1] = lo + (hi - lo) * b / (points - 1);
            Eigen::RowVectorXd xs = fit.standardization ? fit.standardization->apply_x(x) : x;
            out << format_double(x[0]) << '\t' << format_double(x[1]) << '\t' << format_double(fit.incidence_prob(xs))
                << '\n';
        }
    }
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::io, "cannot open '" + path.string() + "' for writing");
    out << contents;
    out.flush();
    if (!out) fail(ErrorCode::io, "failed writing '" + path.string() + "'");
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::io, "cannot open '" + path.string() + "' for reading");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

}  // namespace pcm
