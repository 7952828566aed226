#include "cotlab/train/reward.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace cotlab::train {

void TrainingCurves::append_all(const TrainingCurves& other) {
    reward.insert(reward.end(), other.reward.begin(), other.reward.end());
    provided.insert(provided.end(), other.provided.begin(), other.provided.end());
    holdout.insert(holdout.end(), other.holdout.begin(), other.holdout.end());
    detection.insert(detection.end(), other.detection.begin(), other.detection.end());
    cot_len.insert(cot_len.end(), other.cot_len.begin(), other.cot_len.end());
    kl.insert(kl.end(), other.kl.begin(), other.kl.end());
}

void TrainingCurves::truncate(std::size_t n) {
    reward.resize(std::min(n, reward.size()));
    provided.resize(std::min(n, provided.size()));
    holdout.resize(std::min(n, holdout.size()));
    detection.resize(std::min(n, detection.size()));
    cot_len.resize(std::min(n, cot_len.size()));
    kl.resize(std::min(n, kl.size()));
}

void TrainingCurves::validate() const {
    const std::size_t n = reward.size();
    if (provided.size() != n || holdout.size() != n || detection.size() != n ||
        cot_len.size() != n || kl.size() != n) {
        throw ShapeError("training curves: series lengths differ");
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (provided[i] < 0.0 || provided[i] > 1.0 || holdout[i] < 0.0 || holdout[i] > 1.0) {
            throw ShapeError("training curves: accuracy outside [0,1]");
        }
        if (!std::isfinite(reward[i]) || !std::isfinite(kl[i])) {
            throw NonFiniteError("training curves: non-finite entry");
        }
    }
}

void TrainingCurves::save_csv(const std::string& path) const {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("cannot write curves: " + path);
    os << "step,reward,provided,holdout,detection,cot_len,kl\n";
    char buf[256];
    for (std::size_t i = 0; i < size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", i, reward[i],
                      provided[i], holdout[i], detection[i], cot_len[i], kl[i]);
        os << buf;
    }
}

TrainingCurves TrainingCurves::load_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open curves: " + path);
    TrainingCurves c;
    std::string line;
    std::getline(is, line);  // header
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> row;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        if (row.size() != 7) throw IoError("curves row with wrong arity in " + path);
        c.append(row[1], row[2], row[3], row[4], row[5], row[6]);
    }
    return c;
}

}  // namespace cotlab::train
