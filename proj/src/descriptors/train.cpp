#include "rawmix/descriptors/train.hpp"

#include "rawmix/autodiff/optim.hpp"
#include "rawmix/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace rawmix {
namespace {

struct BatchResult {
    double loss_sum = 0;
    int correct = 0;
};

int count_correct(const ad::Tensor& logits, std::span<const int> labels)
{
    const int c = logits.dim(1);
    int correct = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        auto row = logits.value().subspan(i * c, c);
        const int pred = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
        correct += pred == labels[i];
    }
    return correct;
}

void gather(const PatchSet& set, std::span<const std::size_t> idx, std::vector<RawImage>& imgs,
            std::vector<int>& labels)
{
    imgs.clear();
    labels.clear();
    for (std::size_t i : idx) {
        imgs.push_back(set.patches[i]);
        labels.push_back(set.labels[i]);
    }
}

BatchResult evaluate(RawMixer& model, const PatchSet& set, std::span<const std::size_t> idx,
                     int batch_size)
{
    BatchResult r;
    std::vector<RawImage> imgs;
    std::vector<int> labels;
    for (std::size_t s = 0; s < idx.size(); s += batch_size) {
        const std::size_t n = std::min<std::size_t>(batch_size, idx.size() - s);
        gather(set, idx.subspan(s, n), imgs, labels);
        ad::Tape tape(false);
        RawMixerOutput out = model.forward(tape, imgs, Mode::eval);
        r.loss_sum += ad::cross_entropy_loss(tape, out.logits, labels).item() * n;
        r.correct += count_correct(out.logits, labels);
    }
    return r;
}

} // namespace

nlohmann::json TrainConfig::to_json() const
{
    return {{"epochs", epochs},         {"lr", lr},
            {"weight_decay", weight_decay}, {"batch_size", batch_size},
            {"val_fraction", val_fraction}, {"seed", seed}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j)
{
    TrainConfig c;
    c.epochs = j.value("epochs", c.epochs);
    c.lr = j.value("lr", c.lr);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.val_fraction = j.value("val_fraction", c.val_fraction);
    c.seed = j.value("seed", c.seed);
    if (c.epochs < 0 || c.batch_size < 1 || c.lr < 0 || c.val_fraction < 0 || c.val_fraction >= 1)
        fail(ErrorKind::config, "invalid training config " + c.to_json().dump());
    return c;
}

TrainResult train(RawMixer& model, const PatchSet& patches, const TrainConfig& cfg,
                  const EpochCallback& on_epoch)
{
    const int classes = model.config().num_classes;
    if (classes < 2)
        fail(ErrorKind::data, "training needs at least 2 classes");
    if (patches.labels.size() != patches.size())
        fail(ErrorKind::data, "patch set has " + std::to_string(patches.size()) + " patches but " +
                                  std::to_string(patches.labels.size()) + " labels");
    std::vector<int> per_class(classes, 0);
    for (int l : patches.labels) {
        if (l < 0 || l >= classes)
            fail(ErrorKind::data, "label " + std::to_string(l) + " outside [0, " +
                                      std::to_string(classes) + ")");
        ++per_class[l];
    }
    for (int c = 0; c < classes; ++c)
        if (per_class[c] == 0)
            fail(ErrorKind::data, "class " + std::to_string(c) + " has no training patches");

    const std::size_t n = patches.size();
    std::mt19937_64 rng(cfg.seed);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);

    std::size_t n_val = 0;
    if (cfg.val_fraction > 0)
        n_val = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(cfg.val_fraction * n)));
    if (n_val >= n)
        fail(ErrorKind::data, "too few patches (" + std::to_string(n) + ") for a validation split");
    std::vector<std::size_t> train_idx(order.begin(), order.end() - n_val);
    const std::vector<std::size_t> val_idx(order.end() - n_val, order.end());

    ad::AdamW opt(model.parameters(), {cfg.lr, cfg.weight_decay});
    TrainResult result;
    result.train_count = static_cast<int>(train_idx.size());
    result.val_count = static_cast<int>(n_val);
    std::vector<ad::NamedTensor> best = model.snapshot();
    double best_val_loss = INFINITY;
    result.best_val_acc = -1;

    std::vector<RawImage> imgs;
    std::vector<int> labels;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::shuffle(train_idx.begin(), train_idx.end(), rng);
        BatchResult tr;
        for (std::size_t s = 0; s < train_idx.size(); s += cfg.batch_size) {
            const std::size_t b = std::min<std::size_t>(cfg.batch_size, train_idx.size() - s);
            gather(patches, std::span(train_idx).subspan(s, b), imgs, labels);
            ad::Tape tape;
            RawMixerOutput out = model.forward(tape, imgs, Mode::train);
            ad::Tensor loss = ad::cross_entropy_loss(tape, out.logits, labels);
            opt.zero_grad();
            tape.backward(loss);
            opt.step();
            tr.loss_sum += loss.item() * b;
            tr.correct += count_correct(out.logits, labels);
        }

        EpochStats st;
        st.epoch = epoch;
        st.train_loss = tr.loss_sum / train_idx.size();
        st.train_acc = static_cast<double>(tr.correct) / train_idx.size();
        if (n_val > 0) {
            BatchResult va = evaluate(model, patches, val_idx, cfg.batch_size);
            st.val_loss = va.loss_sum / n_val;
            st.val_acc = static_cast<double>(va.correct) / n_val;
        } else {
            st.val_loss = st.train_loss;
            st.val_acc = st.train_acc;
        }
        result.history.push_back(st);
        if (on_epoch)
            on_epoch(st);

        const bool better = st.val_acc > result.best_val_acc ||
                            (st.val_acc == result.best_val_acc && st.val_loss < best_val_loss);
        if (better) {
            result.best_val_acc = st.val_acc;
            result.best_epoch = epoch;
            best_val_loss = st.val_loss;
            best = model.snapshot();
        }
    }
    if (result.best_epoch > 0)
        model.load_state(best);
    else
        result.best_val_acc = 0;
    return result;
}

} // namespace rawmix
