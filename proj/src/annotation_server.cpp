#include "forge/annotation_server.hpp"

#include <httplib.h>

#include <fmt/chrono.h>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "forge/error.hpp"

namespace forge {

AnnotationService::AnnotationService(DatasetStore& store, std::vector<AnnotationTask> tasks, bool dual_annotation,
                                     std::chrono::seconds lease, Clock clock)
    : store_(store), tasks_(std::move(tasks)), dual_(dual_annotation), lease_(lease), clock_(std::move(clock)) {
    if (!clock_) clock_ = [] { return std::chrono::system_clock::now(); };
    for (std::size_t i = 0; i < tasks_.size(); ++i) index_[tasks_[i].program.id] = i;
    for (auto& r : store_.read<AnnotationRecord>("annotations.jsonl")) {
        if (records_[r.program_id].emplace(r.annotator_id, r).second) ordered_.push_back(r);
    }
}

std::string AnnotationService::now_iso() const {
    return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(std::chrono::system_clock::to_time_t(clock_())));
}

Json AnnotationService::bundle(const AnnotationTask& task) const {
    return Json{{"program", task.program},
                {"requirement",
                 {{"id", task.program.requirement_id}, {"statement", task.statement}, {"language", task.language}}},
                {"report", task.report},
                {"functional_status", task.program.functional_status},
                {"group", task.group}};
}

ApiResponse AnnotationService::next_task(const std::string& annotator) {
    if (annotator.empty()) return {400, Json{{"error", "annotator query parameter is required"}}};
    std::lock_guard lock(mutex_);
    const auto now = clock_();
    for (const auto& task : tasks_) {
        const auto& id = task.program.id;
        auto rec = records_.find(id);
        if (rec != records_.end()) {
            if (rec->second.count(annotator)) continue;
            if (!dual_ && !rec->second.empty()) continue;
        }
        if (!dual_) {
            auto lease = leases_.find(id);
            if (lease != leases_.end() && lease->second.first != annotator && lease->second.second > now) continue;
            leases_[id] = {annotator, now + lease_};
        }
        return {200, bundle(task)};
    }
    return {204, Json{{"message", "no tasks left"}}};
}

ApiResponse AnnotationService::get_task(const std::string& program_id) const {
    auto it = index_.find(program_id);
    if (it == index_.end()) return {404, Json{{"error", "unknown task " + program_id}}};
    return {200, bundle(tasks_[it->second])};
}

ApiResponse AnnotationService::submit(const std::string& program_id, const Json& body) {
    auto it = index_.find(program_id);
    if (it == index_.end()) return {404, Json{{"error", "unknown task " + program_id}}};
    const AnnotationTask& task = tasks_[it->second];

    Json errors = Json::object();
    std::string annotator;
    if (!body.is_object()) {
        return {422, Json{{"error", "invalid annotation"}, {"fields", {{"body", "must be a JSON object"}}}}};
    }
    if (auto a = body.find("annotator"); a == body.end() || !a->is_string() || a->get<std::string>().empty())
        errors["annotator"] = "a non-empty annotator id is required";
    else
        annotator = a->get<std::string>();
    AnnotationAnswer answer;
    if (auto a = body.find("answer"); a == body.end()) {
        errors["answer"] = "answer is required";
    } else {
        try {
            a->get_to(answer);
            for (auto& [field, why] : answer.problems(task.program.functional_status)) errors[field] = why;
        } catch (const ValidationError& e) {
            errors["answer"] = e.what();
        }
    }
    if (!errors.empty()) return {422, Json{{"error", "invalid annotation"}, {"fields", errors}}};

    AnnotationRecord record;
    record.program_id = program_id;
    record.annotator_id = annotator;
    record.answer = answer;
    record.functional_status = task.program.functional_status;
    record.final_score = derive_final_score(record.functional_status, answer);

    std::lock_guard lock(mutex_);
    auto& existing = records_[program_id];
    if (auto prev = existing.find(annotator); prev != existing.end()) {
        if (Json(prev->second.answer) == Json(answer))
            return {200, Json{{"final_score", prev->second.final_score}, {"duplicate", true}}};
        return {409, Json{{"error", "annotation already recorded with a different answer"},
                          {"final_score", prev->second.final_score}}};
    }
    if (!dual_ && !existing.empty())
        return {409, Json{{"error", "program already annotated by " + existing.begin()->first}}};
    record.timestamp = now_iso();
    store_.append("annotations.jsonl", Json(record));
    existing.emplace(annotator, record);
    ordered_.push_back(record);
    leases_.erase(program_id);
    if (answer.rewrite) spdlog::info("audit: {} marked {} for rewrite", annotator, program_id);
    return {200, Json{{"final_score", record.final_score}}};
}

ApiResponse AnnotationService::progress() const {
    std::lock_guard lock(mutex_);
    Json buckets = Json::object();
    std::size_t total = 0, done = 0;
    for (const auto& task : tasks_) {
        auto& b = buckets[task.group];
        if (b.is_null()) b = Json{{"selected", 0}, {"annotated", 0}};
        b["selected"] = b["selected"].get<int>() + 1;
        ++total;
        auto rec = records_.find(task.program.id);
        if (rec != records_.end() && !rec->second.empty()) {
            b["annotated"] = b["annotated"].get<int>() + 1;
            ++done;
        }
    }
    return {200, Json{{"buckets", buckets}, {"selected", total}, {"annotated", done}}};
}

std::string AnnotationService::export_jsonl() const {
    std::lock_guard lock(mutex_);
    std::string out;
    for (const auto& r : ordered_) out += to_jsonl_line(Json(r)) + "\n";
    return out;
}

std::size_t AnnotationService::record_count() const {
    std::lock_guard lock(mutex_);
    return ordered_.size();
}

AnnotationServer::AnnotationServer(AnnotationService& service, std::string static_dir)
    : service_(service), static_dir_(std::move(static_dir)), server_(std::make_unique<httplib::Server>()) {
    routes();
}

AnnotationServer::~AnnotationServer() { stop(); }

namespace {

void reply(httplib::Response& res, const ApiResponse& api) {
    res.status = api.status;
    if (api.status != 204) res.set_content(api.body.dump(), "application/json");
}

}  // namespace

void AnnotationServer::routes() {
    auto& s = *server_;
    s.Get("/api/tasks/next", [this](const httplib::Request& req, httplib::Response& res) {
        reply(res, service_.next_task(req.has_param("annotator") ? req.get_param_value("annotator") : ""));
    });
    s.Get(R"(/api/tasks/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
        reply(res, service_.get_task(req.matches[1]));
    });
    s.Post(R"(/api/tasks/([^/]+)/annotation)", [this](const httplib::Request& req, httplib::Response& res) {
        Json body = Json::parse(req.body, nullptr, false);
        if (body.is_discarded()) {
            reply(res, {422, Json{{"error", "invalid annotation"}, {"fields", {{"body", "malformed JSON"}}}}});
            return;
        }
        reply(res, service_.submit(req.matches[1], body));
    });
    s.Get("/api/progress", [this](const httplib::Request&, httplib::Response& res) { reply(res, service_.progress()); });
    s.Get("/api/export", [this](const httplib::Request&, httplib::Response& res) {
        res.set_content(service_.export_jsonl(), "application/x-ndjson");
    });
    if (!static_dir_.empty()) s.set_mount_point("/", static_dir_);
}

int AnnotationServer::start(const std::string& host, int port) {
    int bound = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
    if (bound < 0) throw ExternalError(fmt::format("cannot bind {}:{}", host, port));
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
    return bound;
}

void AnnotationServer::listen(const std::string& host, int port) {
    if (!server_->listen(host, port)) throw ExternalError(fmt::format("cannot listen on {}:{}", host, port));
}

void AnnotationServer::stop() {
    if (server_) server_->stop();
    if (thread_.joinable()) thread_.join();
}

}  // namespace forge
