// SPDX-License-Identifier: Apache-2.0
//
// Trains a small classifier on four generated shape kinds and prints the
// test accuracy after each epoch.

#include <iostream>

#include "pct/pct.hpp"

int main() {
  using namespace pct;

  DatasetConfig data;
  data.kinds = {ShapeKind::sphere, ShapeKind::cube, ShapeKind::torus, ShapeKind::plane};
  data.per_class = 20;
  data.points = 128;
  const auto items = generate_dataset(data, 42);
  const auto train_set = clouds_of(items, Split::train);
  const auto test_set = clouds_of(items, Split::test);

  PctModel model(desk_model(Variant::spct, Task::classify, data.kinds.size(), data.points), 1);
  std::cout << count_trainable(model.parameters()) << " trainable parameters\n";

  TrainConfig cfg;
  cfg.epochs = 8;
  cfg.batch = 8;
  train(model, train_set, test_set, cfg, [](const EpochLog& e) {
    std::cout << "epoch " << e.epoch << "  loss " << e.train_loss << "  test accuracy " << e.eval_metric << "\n";
  });
}
