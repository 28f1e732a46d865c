#include "panelpower/service.hpp"

#include <httplib.h>

#include <atomic>
#include <cmath>
#include <map>
#include <optional>
#include <vector>

#include "panelpower/error.hpp"
#include "panelpower/power.hpp"
#include "panelpower/presets.hpp"
#include "panelpower/variance.hpp"

namespace panelpower {

using nlohmann::json;

namespace {

// A rejection that maps to an HTTP status other than the error-code default.
struct RequestError {
    int status;
    std::string code;
    std::string message;
    std::string field;
};

int status_for(ErrorCode code) {
    return code == ErrorCode::NonpositiveDf || code == ErrorCode::NoConvergence ? 422 : 400;
}

json error_object(std::string_view code, std::string_view message, std::string_view field) {
    json e{{"code", code}, {"message", message}};
    e["field"] = field.empty() ? json(nullptr) : json(field);
    return e;
}

ApiResponse envelope_error(const json& request, int status, std::string_view code, std::string_view message,
                           std::string_view field) {
    return {status, json{{"request", request}, {"error", error_object(code, message, field)}, {"warnings", json::array()}}};
}

bool all_finite(const json& j) {
    if (j.is_number_float()) return std::isfinite(j.get<double>());
    if (j.is_structured()) {
        for (const auto& v : j)
            if (!all_finite(v)) return false;
    }
    return true;
}

json parse_body(std::string_view body) {
    try {
        return json::parse(body);
    } catch (const json::parse_error& e) {
        throw RequestError{400, std::string(error_name(ErrorCode::InvalidInput)), std::string("malformed JSON: ") + e.what(), ""};
    }
}

Scenario scenario_from(const json& j) { return j.get<Scenario>(); }

ValidatedDesign validated(const Scenario& s) {
    return validate_design(design_for_family(s.design, s.estimator.family), s.estimator);
}

// Rescale total cluster count before validation; zero-comparison ITS designs stay zero.
void set_total_clusters(Scenario& s, double total) {
    const double current = s.design.total_clusters();
    if (!(total > 0.0) || !(current > 0.0))
        throw PanelPowerError(ErrorCode::InvalidInput, "M must be positive", "M");
    for (double& m : s.design.treated_clusters) m *= total / current;
    for (double& m : s.design.comparison_clusters) m *= total / current;
}

void apply_parameter(Scenario& s, const std::string& name, double value) {
    auto covariates = [&]() -> Covariates& {
        if (!s.estimator.covariates) s.estimator.covariates = Covariates{};
        return *s.estimator.covariates;
    };
    if (name == "rho") s.error.rho = value;
    else if (name == "psi") s.error.psi = value;
    else if (name == "ICC_theta") s.error.icc = value;
    else if (name == "N") s.design.individuals = value;
    else if (name == "mde_target") s.mde_target = value;
    else if (name == "alpha") s.query.alpha = value;
    else if (name == "lambda") s.query.power = value;
    else if (name == "M") set_total_clusters(s, value);
    else if (name == "l") s.estimator.estimand = Estimand::exposure(static_cast<int>(std::lround(value)));
    else if (name == "q") s.estimator.estimand = Estimand::calendar(static_cast<int>(std::lround(value)));
    else if (name == "R2_YX") covariates().r2_yx = value;
    else if (name == "R2_TX") covariates().r2_tx = value;
    else if (name == "v") covariates().count = static_cast<int>(std::lround(value));
    else throw PanelPowerError(ErrorCode::InvalidInput, "cannot sweep parameter '" + name + "'", "sweep");
}

json result_mde(const Scenario& s, std::vector<std::string>& warnings) {
    PowerResult r = mde(validated(s), s.error, s.query);
    warnings = r.warnings;
    return r;
}

json result_clusters(const Scenario& s, std::vector<std::string>& warnings) {
    PowerResult r = required_clusters(validated(s), s.error, s.query, s.mde_target);
    warnings = r.warnings;
    return r;
}

json result_variance(const Scenario& s) {
    const ValidatedDesign d = validated(s);
    json out = variance(d, s.error);
    out["geometry"] = d.geometry();
    return out;
}

json result_design_effect(const json& body) {
    if (!body.is_object() || !body.contains("a") || !body.contains("b"))
        throw PanelPowerError(ErrorCode::InvalidInput, "design-effect needs designs 'a' and 'b'", "a");
    const Scenario a = body.at("a").get<Scenario>();
    const Scenario b = body.at("b").get<Scenario>();
    const double target = body.value("mde_target", a.mde_target);
    const double ma = required_clusters(validated(a), a.error, a.query, target).clusters_continuous;
    const double mb = required_clusters(validated(b), b.error, a.query, target).clusters_continuous;
    return json{{"design_effect", ma / mb}, {"M_continuous_a", ma}, {"M_continuous_b", mb}};
}

struct Sweep {
    std::string parameter;
    std::vector<double> values;
};

struct GridPlan {
    json request;
    Scenario base;
    std::string target;
    std::vector<Sweep> sweeps;
    std::size_t count = 1;
};

Sweep parse_sweep(const json& j) {
    Sweep s;
    if (!j.is_object() || !j.contains("parameter"))
        throw PanelPowerError(ErrorCode::InvalidInput, "each sweep needs a parameter", "sweep");
    s.parameter = j.at("parameter").get<std::string>();
    if (j.contains("values")) {
        s.values = j.at("values").get<std::vector<double>>();
    } else {
        const double from = j.at("from").get<double>();
        const double to = j.at("to").get<double>();
        const auto steps = j.at("steps").get<long long>();
        if (steps < 1 || steps > static_cast<long long>(kMaxGridPoints) + 1)
            throw RequestError{413, "GRID_TOO_LARGE", "grid exceeds " + std::to_string(kMaxGridPoints) + " points", "sweep"};
        for (long long i = 0; i < steps; ++i)
            s.values.push_back(steps == 1 ? from : from + (to - from) * static_cast<double>(i) / static_cast<double>(steps - 1));
    }
    if (s.values.empty()) throw PanelPowerError(ErrorCode::InvalidInput, "a sweep needs at least one value", "sweep");
    return s;
}

GridPlan plan_grid(std::string_view body) {
    GridPlan plan;
    plan.request = parse_body(body);
    const json& j = plan.request;
    try {
        if (!j.is_object() || !j.contains("base"))
            throw PanelPowerError(ErrorCode::InvalidInput, "grid needs a base scenario", "base");
        plan.base = j.at("base").get<Scenario>();
        plan.target = j.value("target", std::string("clusters"));
        if (plan.target != "clusters" && plan.target != "mde" && plan.target != "variance")
            throw PanelPowerError(ErrorCode::InvalidInput, "target must be clusters, mde or variance", "target");
        const json sweeps = j.contains("sweep") ? j.at("sweep") : json::array();
        if (sweeps.is_array()) {
            for (const json& s : sweeps) plan.sweeps.push_back(parse_sweep(s));
        } else {
            plan.sweeps.push_back(parse_sweep(sweeps));
        }
    } catch (const json::exception& e) {
        throw PanelPowerError(ErrorCode::InvalidInput, std::string("bad grid request: ") + e.what(), "sweep");
    }
    for (const Sweep& s : plan.sweeps) {
        if (s.values.size() > kMaxGridPoints || plan.count * s.values.size() > kMaxGridPoints)
            throw RequestError{413, "GRID_TOO_LARGE", "grid exceeds " + std::to_string(kMaxGridPoints) + " points", "sweep"};
        plan.count *= s.values.size();
    }
    return plan;
}

json grid_row(const GridPlan& plan, std::size_t index) {
    Scenario s = plan.base;
    json params = json::object();
    std::size_t rest = index;
    // Last sweep varies fastest.
    std::vector<std::size_t> pos(plan.sweeps.size());
    for (std::size_t i = plan.sweeps.size(); i-- > 0;) {
        pos[i] = rest % plan.sweeps[i].values.size();
        rest /= plan.sweeps[i].values.size();
    }
    json row{{"index", index}};
    try {
        for (std::size_t i = 0; i < plan.sweeps.size(); ++i) {
            const double v = plan.sweeps[i].values[pos[i]];
            params[plan.sweeps[i].parameter] = v;
            apply_parameter(s, plan.sweeps[i].parameter, v);
        }
        row["params"] = params;
        json result;
        if (plan.target == "variance") {
            const VarianceBreakdown v = variance(validated(s), s.error);
            result = json{{"total", v.total}, {"theta_block", v.theta_block}, {"epsilon_block", v.epsilon_block}};
        } else if (plan.target == "mde") {
            const PowerResult r = mde(validated(s), s.error, s.query);
            result = json{{"mde", *r.mde}, {"df", r.df}, {"factor", r.factor}, {"variance", r.variance.total}};
        } else {
            const PowerResult r = required_clusters(validated(s), s.error, s.query, s.mde_target);
            result = json{{"M", *r.clusters}, {"M_continuous", r.clusters_continuous}, {"df", r.df},
                          {"factor", r.factor}, {"mde", *r.mde}};
        }
        if (!all_finite(result)) throw PanelPowerError(ErrorCode::NumericGuard, "non-finite result");
        row["result"] = result;
    } catch (const PanelPowerError& e) {
        row["params"] = params;
        row["error"] = error_object(error_name(e.code()), e.message(), e.field());
    }
    return row;
}

ApiResponse dispatch(std::string_view method, std::string_view endpoint, std::string_view body) {
    if (endpoint == "/v1/health") {
        if (method != "GET") throw RequestError{405, "METHOD_NOT_ALLOWED", "use GET", ""};
        return {200, json{{"request", nullptr},
                          {"result", {{"status", "ok"}, {"version", PANELPOWER_VERSION}}},
                          {"warnings", json::array()}}};
    }
    if (endpoint == "/v1/presets") {
        if (method != "GET") throw RequestError{405, "METHOD_NOT_ALLOWED", "use GET", ""};
        return {200, json{{"request", nullptr}, {"result", presets()}, {"warnings", json::array()}}};
    }
    static const std::vector<std::string_view> posts = {"/v1/mde", "/v1/clusters", "/v1/variance", "/v1/design-effect",
                                                        "/v1/grid"};
    if (std::find(posts.begin(), posts.end(), endpoint) == posts.end())
        throw RequestError{404, "NOT_FOUND", "unknown endpoint", ""};
    if (method != "POST") throw RequestError{405, "METHOD_NOT_ALLOWED", "use POST", ""};

    if (endpoint == "/v1/grid") {
        const GridPlan plan = plan_grid(body);
        json rows = json::array();
        for (std::size_t i = 0; i < plan.count; ++i) rows.push_back(grid_row(plan, i));
        return {200, json{{"request", plan.request},
                          {"result", {{"count", plan.count}, {"rows", std::move(rows)}}},
                          {"warnings", json::array()}}};
    }

    const json request = parse_body(body);
    std::vector<std::string> warnings;
    json result;
    try {
        if (endpoint == "/v1/design-effect") {
            result = result_design_effect(request);
        } else {
            const Scenario s = scenario_from(request);
            if (endpoint == "/v1/mde") result = result_mde(s, warnings);
            else if (endpoint == "/v1/clusters") result = result_clusters(s, warnings);
            else result = result_variance(s);
        }
    } catch (const json::exception& e) {
        throw PanelPowerError(ErrorCode::InvalidInput, std::string("bad request: ") + e.what());
    }
    if (!all_finite(result)) throw PanelPowerError(ErrorCode::NumericGuard, "non-finite value in result");
    return {200, json{{"request", request}, {"result", std::move(result)}, {"warnings", warnings}}};
}

json echo_of(std::string_view body) {
    if (body.empty()) return nullptr;
    try {
        return json::parse(body);
    } catch (const json::exception&) {
        return std::string(body);
    }
}

}  // namespace

ApiResponse handle_request(std::string_view method, std::string_view endpoint, std::string_view body) {
    try {
        return dispatch(method, endpoint, body);
    } catch (const RequestError& e) {
        return envelope_error(echo_of(body), e.status, e.code, e.message, e.field);
    } catch (const PanelPowerError& e) {
        return envelope_error(echo_of(body), status_for(e.code()), error_name(e.code()), e.message(), e.field());
    }
}

bool stream_grid(std::string_view body, const std::function<bool(std::string_view)>& sink, ApiResponse& rejected) {
    GridPlan plan;
    try {
        plan = plan_grid(body);
    } catch (const RequestError& e) {
        rejected = envelope_error(echo_of(body), e.status, e.code, e.message, e.field);
        return false;
    } catch (const PanelPowerError& e) {
        rejected = envelope_error(echo_of(body), status_for(e.code()), error_name(e.code()), e.message(), e.field());
        return false;
    }
    // Same bytes as the non-streamed envelope: keys in sorted order.
    std::string head = "{\"request\":" + plan.request.dump() + ",\"result\":{\"count\":" + std::to_string(plan.count) +
                       ",\"rows\":[";
    if (!sink(head)) return true;
    for (std::size_t i = 0; i < plan.count; ++i) {
        std::string row = grid_row(plan, i).dump();
        if (i > 0) row.insert(row.begin(), ',');
        if (!sink(row)) return true;
    }
    sink("]},\"warnings\":[]}");
    return true;
}

struct Service::Impl {
    ServiceOptions options;
    httplib::Server server;
    std::atomic<bool> bound{false};
};

Service::Service(ServiceOptions options) : impl_(std::make_unique<Impl>()) {
    impl_->options = std::move(options);
    httplib::Server& srv = impl_->server;
    const ServiceOptions& opt = impl_->options;

    const std::string origin = opt.restrict_cors ? opt.allowed_origin : "*";
    srv.set_post_routing_handler([origin](const httplib::Request&, httplib::Response& res) {
        if (origin.empty()) return;
        res.set_header("Access-Control-Allow-Origin", origin);
        res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
        res.set_header("Access-Control-Allow-Headers", "Content-Type");
    });
    srv.Options(R"(/v1/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

    auto plain = [](const httplib::Request& req, httplib::Response& res) {
        const ApiResponse r = handle_request(req.method, req.path, req.body);
        res.status = r.status;
        res.set_content(r.body.dump(), "application/json");
    };
    srv.Get("/v1/health", plain);
    srv.Get("/v1/presets", plain);
    srv.Post(R"(/v1/(mde|clusters|variance|design-effect))", plain);
    srv.Post("/v1/grid", [](const httplib::Request& req, httplib::Response& res) {
        ApiResponse rejected;
        // Plan once up front so rejections carry a proper status.
        if (!stream_grid(req.body, [](std::string_view) { return false; }, rejected)) {
            res.status = rejected.status;
            res.set_content(rejected.body.dump(), "application/json");
            return;
        }
        auto body = std::make_shared<std::string>(req.body);
        res.set_chunked_content_provider("application/json", [body](std::size_t, httplib::DataSink& sink) {
            ApiResponse unused;
            stream_grid(*body, [&](std::string_view chunk) { return sink.write(chunk.data(), chunk.size()); }, unused);
            sink.done();
            return true;
        });
    });
    if (!opt.static_dir.empty()) srv.set_mount_point("/", opt.static_dir);
}

Service::~Service() { stop(); }

int Service::bind() {
    const ServiceOptions& opt = impl_->options;
    int port = -1;
    if (opt.port == 0) {
        port = impl_->server.bind_to_any_port(opt.host);
    } else if (impl_->server.bind_to_port(opt.host, opt.port)) {
        port = opt.port;
    }
    impl_->bound = port > 0;
    return port;
}

bool Service::listen() { return impl_->bound && impl_->server.listen_after_bind(); }

void Service::stop() {
    if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

bool Service::running() const { return impl_->server.is_running(); }

}  // namespace panelpower
