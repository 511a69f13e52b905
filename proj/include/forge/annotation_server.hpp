#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "forge/calibration.hpp"
#include "forge/store.hpp"

namespace httplib {
class Server;
}

namespace forge {

struct AnnotationTask {
    Program program;
    std::string statement;
    Language language = Language::python;
    std::string group;  // selection bucket key
    DiagnosisReport report;
};

struct ApiResponse {
    int status = 200;
    Json body;
};

// Task queue and submission rules behind the annotation HTTP API.
class AnnotationService {
public:
    using Clock = std::function<std::chrono::system_clock::time_point()>;

    AnnotationService(DatasetStore& store, std::vector<AnnotationTask> tasks, bool dual_annotation = false,
                      std::chrono::seconds lease = std::chrono::minutes(30), Clock clock = {});

    ApiResponse next_task(const std::string& annotator);
    ApiResponse get_task(const std::string& program_id) const;
    ApiResponse submit(const std::string& program_id, const Json& body);
    ApiResponse progress() const;
    std::string export_jsonl() const;

    std::size_t record_count() const;

private:
    Json bundle(const AnnotationTask& task) const;
    std::string now_iso() const;

    DatasetStore& store_;
    std::vector<AnnotationTask> tasks_;
    std::map<std::string, std::size_t> index_;
    bool dual_;
    std::chrono::seconds lease_;
    Clock clock_;
    // program -> annotator -> record
    std::map<std::string, std::map<std::string, AnnotationRecord>> records_;
    std::vector<AnnotationRecord> ordered_;
    std::map<std::string, std::pair<std::string, std::chrono::system_clock::time_point>> leases_;
    mutable std::mutex mutex_;
};

// httplib front end for AnnotationService.
class AnnotationServer {
public:
    explicit AnnotationServer(AnnotationService& service, std::string static_dir = {});
    ~AnnotationServer();

    // Binds and serves on a background thread; port 0 picks a free port.
    int start(const std::string& host, int port);
    // Serves on the calling thread until stop().
    void listen(const std::string& host, int port);
    void stop();

private:
    void routes();

    AnnotationService& service_;
    std::string static_dir_;
    std::unique_ptr<httplib::Server> server_;
    std::thread thread_;
};

}  // namespace forge
