#include "lyricpref/recurrent.hpp"

namespace lyricpref {

template struct RecurrentParams<double>;
template class BiLstmAttention<double>;
template struct RecurrentModel<double>;
template RecurrentModel<double> train_recurrent<double>(std::span<const MatrixXd>, const Labels&,
                                                        std::span<const MatrixXd>, const Labels&,
                                                        const RecurrentOptions&);
template GradientCheck check_gradients<double>(const BiLstmAttention<double>&, std::span<const MatrixXd>,
                                               std::span<const int>, double);

} // namespace lyricpref
