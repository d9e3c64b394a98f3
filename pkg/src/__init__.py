# Descomposición intrínseca con invariantes de razones cruzadas de color
